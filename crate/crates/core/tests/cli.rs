//! The command-line runner: determinism, overrides and exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uncollapse"))
}

fn run_sweep(dir: &Path, extra: &[&str]) -> std::process::Output {
    bin()
        .args(["sweep", "--shots", "1500", "--p-values", "0,0.5,0.9", "--n-bootstrap", "100"])
        .arg("--output-path")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run_sweep(a.path(), &["--seed", "5"]).status.success());
    assert!(run_sweep(b.path(), &["--seed", "5"]).status.success());
    for name in ["sweep.csv", "sweep.svg"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    // the JSON echoes the output path, which differs between the two runs
    let strip = |d: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_slice(&std::fs::read(d.join("sweep.json")).unwrap()).unwrap();
        v["config"]["output_path"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
    let c = tempfile::tempdir().unwrap();
    assert!(run_sweep(c.path(), &["--seed", "6"]).status.success());
    assert_ne!(
        std::fs::read(a.path().join("sweep.csv")).unwrap(),
        std::fs::read(c.path().join("sweep.csv")).unwrap()
    );
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"experiment": "repeat", "gamma_t": 2.0, "repeats": [4], "shots": 5}"#).unwrap();
    let out = bin()
        .args(["repeat", "--config"])
        .arg(&cfg)
        .args(["--shots", "2000", "--output-path"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("repeat.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["shots"], 2000);
    assert_eq!(json["config"]["gamma_t"], 2.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"p_values": [2.0]}"#).unwrap();
    let out = bin().args(["sweep", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let mismatch = dir.path().join("mismatch.json");
    std::fs::write(&mismatch, r#"{"experiment": "dfs"}"#).unwrap();
    let out = bin().args(["sweep", "--config"]).arg(&mismatch).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["dfs", "--shots", "0"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let out = bin().args(["sweep", "--config"]).arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(4));

    // a regular file where the output directory should be
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = bin()
        .args(["dfs", "--p-values", "0.5", "--output-path"])
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}
