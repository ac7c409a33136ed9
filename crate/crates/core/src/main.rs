use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let result = texsr::cli::run_command(std::env::args_os());
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    for line in &result.lines {
        let _ = if result.exit_code == texsr::cli::EXIT_USAGE {
            writeln!(stderr, "{line}")
        } else {
            writeln!(stdout, "{line}")
        };
    }
    std::process::exit(result.exit_code);
}
