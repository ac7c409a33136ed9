//! Writes a small procedural scene in the texsr layout.
//!
//!     cargo run --example demo_scene -- /tmp/demo [views]

use std::path::PathBuf;

use texsr::dataset::{write_demo_scene, DemoSceneConfig};

fn main() {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next().map(PathBuf::from) else {
        eprintln!("usage: demo_scene <dir> [views]");
        std::process::exit(1);
    };
    let mut cfg = DemoSceneConfig::default();
    if let Some(v) = args.next() {
        cfg.views = v.parse().unwrap_or_else(|_| {
            eprintln!("views must be a positive integer");
            std::process::exit(1);
        });
    }
    match write_demo_scene(&dir, &cfg) {
        Ok(m) => println!("{}: {} views, atlas {}x{}", dir.display(), m.scales[0].images.len(), m.atlas_size[0], m.atlas_size[1]),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    }
}
