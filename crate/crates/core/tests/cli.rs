use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use texsr::cli::{run_command, CommandResult, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use texsr::dataset::{write_demo_scene, DemoSceneConfig};

fn demo(dir: &Path) {
    let cfg = DemoSceneConfig {
        name: "cli".into(),
        views: 4,
        width: 64,
        height: 48,
        atlas_size: [64, 32],
    };
    write_demo_scene(dir, &cfg).unwrap();
}

fn run(args: &[&str]) -> CommandResult {
    run_command(std::iter::once("texsr").chain(args.iter().copied()))
}

fn p(dir: &Path, rel: &str) -> String {
    dir.join(rel).display().to_string()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().display().to_string(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Runs every pipeline on a fresh scene with the given thread count.
fn all_pipelines(dir: &Path, threads: &str) {
    demo(dir);
    let m = p(dir, "manifest.json");
    let t = ["--threads", threads];
    let steps: Vec<Vec<String>> = vec![
        vec!["gen-lr", "--manifest", &m, "--factor", "2"].into_iter().map(String::from).collect(),
        vec!["retrieve", "--manifest", &m, "--scale", "1", "--out", &p(dir, "bp.png")]
            .into_iter()
            .map(String::from)
            .collect(),
        vec![
            "retrieve", "--manifest", &m, "--scale", "2", "--mode", "least-squares", "--max-iters", "20", "--out",
            &p(dir, "ls.png"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec!["render", "--manifest", &m, "--scale", "2", "--texture", &p(dir, "x2/texture.png"), "--out-dir", &p(dir, "renders")]
            .into_iter()
            .map(String::from)
            .collect(),
        vec!["bake-normals", "--manifest", &m, "--scale", "2"].into_iter().map(String::from).collect(),
        vec![
            "upsample", "--input", &p(dir, "x2/texture.png"), "--input-mask", &p(dir, "x2/mask.png"), "--hr-mask",
            &p(dir, "x1/mask.png"), "--scale", "2", "--kernel", "lanczos", "--out", &p(dir, "up.png"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec![
            "model-sr", "--manifest", &m, "--scale", "2", "--max-iters", "10", "--out", &p(dir, "msr.png"), "--trace",
            &p(dir, "trace.csv"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec![
            "evaluate", "--gt", &p(dir, "x1/texture.png"), "--mask", &p(dir, "x1/mask.png"), "--test", &p(dir, "msr.png"),
            "--test-mask", &p(dir, "msr_mask.png"), "--csv", &p(dir, "rows.csv"),
        ]
        .into_iter()
        .map(String::from)
        .collect(),
        vec!["evaluate", "--summarize", &p(dir, "rows.csv"), "--table", &p(dir, "table.csv")]
            .into_iter()
            .map(String::from)
            .collect(),
    ];
    for s in steps {
        let mut args: Vec<&str> = t.to_vec();
        args.extend(s.iter().map(String::as_str));
        let r = run(&args);
        assert_eq!(r.exit_code, EXIT_OK, "{s:?}: {:?}", r.lines);
        for a in &r.artifacts {
            assert!(a.exists(), "{}", a.display());
        }
    }
}

#[test]
fn artifacts_do_not_depend_on_thread_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    all_pipelines(a.path(), "1");
    all_pipelines(b.path(), "8");
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.keys().collect::<Vec<_>>(), sb.keys().collect::<Vec<_>>());
    for (k, v) in &sa {
        assert!(v == &sb[k], "{k} differs");
    }
    assert!(sa.contains_key("x2/normals.png"));
    assert!(sa.len() > 20);
}

#[test]
fn retrieve_reports_counts_and_writes_default_paths() {
    let dir = tempfile::tempdir().unwrap();
    demo(dir.path());
    let r = run(&["retrieve", "--manifest", &p(dir.path(), "manifest.json"), "--scale", "1", "--mode", "backprojection"]);
    assert_eq!(r.exit_code, EXIT_OK);
    assert_eq!(r.artifacts, vec![dir.path().join("x1/texture.png"), dir.path().join("x1/mask.png")]);
    assert!(r.lines[0].contains("active=") && r.lines[0].contains("unseen="), "{:?}", r.lines);
}

#[test]
fn evaluate_prints_metrics_line_and_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    demo(dir.path());
    let gt = p(dir.path(), "x1/texture.png");
    let mask = p(dir.path(), "x1/mask.png");
    let r = run(&["evaluate", "--gt", &gt, "--test", &gt, "--mask", &mask, "--scene", "s", "--method", "copy"]);
    assert_eq!(r.exit_code, EXIT_OK, "{:?}", r.lines);
    assert_eq!(r.lines[0], "psnr=inf ssim=1.000000");
    assert_eq!(r.lines[1], "scene,subset,method,scale,psnr_db,ssim,active_texels");
    assert!(r.lines[2].starts_with("s,custom,copy,1,inf,1.000000,"));
}

#[test]
fn usage_errors_exit_1() {
    let r = run(&["frobnicate"]);
    assert_eq!(r.exit_code, EXIT_USAGE);
    assert!(r.lines.iter().any(|l| l.contains("Usage")));
    assert_eq!(run(&["retrieve", "--no-such-flag"]).exit_code, EXIT_USAGE);
    assert_eq!(run(&["--threads", "0", "validate-manifest", "--manifest", "m.json"]).exit_code, EXIT_USAGE);
    assert_eq!(run(&["evaluate"]).exit_code, EXIT_USAGE);
    assert_eq!(run(&["--help"]).exit_code, EXIT_OK);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let r = run(&["validate-manifest", "--manifest", &p(dir.path(), "missing.json")]);
    assert_eq!(r.exit_code, EXIT_DATA);
    assert!(r.lines.last().unwrap().contains("missing.json"));

    demo(dir.path());
    let m = p(dir.path(), "manifest.json");
    assert_eq!(run(&["gen-lr", "--manifest", &m, "--factor", "5"]).exit_code, EXIT_DATA);
    assert_eq!(run(&["retrieve", "--manifest", &m, "--scale", "3"]).exit_code, EXIT_DATA);
    assert_eq!(run(&["retrieve", "--manifest", &m, "--sigma=-1"]).exit_code, EXIT_DATA);
    fs::remove_file(dir.path().join("x1/cams/view_002.txt")).unwrap();
    let r = run(&["validate-manifest", "--manifest", &m]);
    assert_eq!(r.exit_code, EXIT_DATA);
    assert!(r.lines.last().unwrap().contains("view_002.txt"));
}
