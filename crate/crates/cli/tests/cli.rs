use std::path::Path;
use std::process::{Command, Output};

fn bn6(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bn6"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("BN6_OUT")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn constants_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = bn6(dir.path(), &["constants"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&dir.path().join("constants.json"));
    assert_eq!(v["result"]["alpha6"].as_f64(), Some(24.0));
    assert!(v["result"]["provenance"]["d1"].is_string());
    assert_eq!(v["provenance"]["command"], "constants");
    assert!(v["provenance"]["version"].as_str().unwrap().starts_with("bn6 "));
    assert_eq!(v["provenance"]["config"]["N"], "6");
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["ground-state", "--N", "6", "--lambda", "12", "--grid-n", "256", "--format", "csv"];
    assert_eq!(bn6(dir.path(), &args).status.code(), Some(0));
    let first_csv = std::fs::read(dir.path().join("ground_state_profile.csv")).unwrap();
    let first_json = std::fs::read(dir.path().join("ground_state.json")).unwrap();
    assert_eq!(bn6(dir.path(), &args).status.code(), Some(0));
    assert_eq!(first_csv, std::fs::read(dir.path().join("ground_state_profile.csv")).unwrap());
    assert_eq!(first_json, std::fs::read(dir.path().join("ground_state.json")).unwrap());
}

#[test]
fn branch_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["limits", "--N", "3", "--m", "1", "--set", "a_end=1e3"];
    assert_eq!(bn6(dir.path(), &args).status.code(), Some(0));
    let a = std::fs::read(dir.path().join("limits.json")).unwrap();
    assert_eq!(bn6(dir.path(), &args).status.code(), Some(0));
    assert_eq!(a, std::fs::read(dir.path().join("limits.json")).unwrap());
}

#[test]
fn csv_header_follows_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let out = bn6(dir.path(), &["branch", "--N", "3", "--m", "2", "--set", "a_end=64", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("branch_branch.csv")).unwrap();
    let mut body = text.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(body.next(), Some("amplitude,lambda,residual"));
    assert_eq!(body.count(), 7);
    assert!(text.contains("# m = 2"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = bn6(dir.path(), &["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    assert_eq!(bn6(dir.path(), &["constants", "--format", "xml"]).status.code(), Some(3));
    assert_eq!(bn6(dir.path(), &["constants", "--set", "colour=red"]).status.code(), Some(3));
    assert_eq!(bn6(dir.path(), &["lambda0", "--N", "4"]).status.code(), Some(3));
    let failed = bn6(dir.path(), &["ground-state", "--N", "3", "--lambda", "0.5", "--grid-n", "128"]);
    assert_eq!(failed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("no sign change"));
}

#[test]
fn config_file_and_env_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# ground state at a fixed lambda\nN = 6\nlambda = 12\ngrid_n = 128\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bn6"))
        .args(["ground-state", "--config"])
        .arg(&cfg)
        .env("BN6_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("ground_state.json"));
    assert_eq!(v["provenance"]["config"]["grid_n"], "128");
    assert_eq!(v["result"]["grid_n"], 128);
    assert_eq!(v["tables"]["profile"]["columns"][0], "r");
    std::fs::write(&cfg, "N: 6\n").unwrap();
    let bad = bn6(dir.path(), &["constants", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
}
