use std::path::Path;
use std::process::Command;

use kornlab::config::ExperimentConfig;
use kornlab::experiment::{run, EXIT_USAGE};

const SMALL_KORN2: &str = r#"{
  "experiment": "korn2",
  "surfaces": [{"kind": "plate", "theta_max": 1, "z_min": 0, "z_max": 1}],
  "h_sweep": {"h_max": 0.0625, "count": 5},
  "grid": {"n_t": 3, "n_theta": 9, "n_z": 9}
}"#;

fn kornlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_kornlab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn korn2_sweep_writes_one_row_per_h() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_KORN2);
    let out = dir.path().join("out");
    let o = kornlab(&["korn2", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "1"]);
    let code = o.status.code().unwrap();
    assert!((0..=2).contains(&code), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "surface,thickness_kind,h,n_t,n_theta,n_z,quantity_name,value,residual,witness_file"
    );
    assert_eq!(lines.count(), 5);
    for f in ["summary.txt", "summary.json", "plot_plate_c2.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("plate:c2"));
}

#[test]
fn usage_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_KORN2);
    let o = kornlab(&["interp", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));

    let empty = SMALL_KORN2.replace("\"count\": 5", "\"count\": 0");
    let cfg = write_config(dir.path(), &empty);
    let o = kornlab(&["korn2", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&o.stderr).contains("h_sweep.count"));

    assert_eq!(kornlab(&["korn3", "--config", &cfg]).status.code(), Some(EXIT_USAGE));
    assert_eq!(kornlab(&["korn2"]).status.code(), Some(EXIT_USAGE));
    let cfg = write_config(dir.path(), SMALL_KORN2);
    assert_eq!(kornlab(&["korn2", "--config", &cfg, "--workers", "0"]).status.code(), Some(EXIT_USAGE));
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn runs_are_reproducible_across_worker_counts() {
    let mut cfg = ExperimentConfig::from_json(SMALL_KORN2).unwrap();
    cfg.h_sweep.count = 3;
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    run(&cfg, dirs[0].path(), Some(1)).unwrap();
    run(&cfg, dirs[1].path(), Some(1)).unwrap();
    run(&cfg, dirs[2].path(), Some(2)).unwrap();
    let a = artifacts(dirs[0].path());
    assert!(a.iter().any(|(n, _)| n == "results.csv"));
    assert_eq!(a, artifacts(dirs[1].path()));
    assert_eq!(a, artifacts(dirs[2].path()));
}

#[test]
fn harmonic_runs_are_reproducible_across_worker_counts() {
    let mut cfg = ExperimentConfig::preset(kornlab::config::ExperimentKind::Harmonic);
    cfg.h_sweep.count = 3;
    cfg.seeds = 4;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&cfg, a.path(), Some(1)).unwrap();
    run(&cfg, b.path(), Some(2)).unwrap();
    let files = artifacts(a.path());
    assert!(files.iter().any(|(n, _)| n == "harmonic.csv"));
    assert_eq!(files, artifacts(b.path()));
}
