use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fracmv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracmv")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.json"))
}

fn edited_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(config("smoke")).unwrap()).unwrap();
    edit(&mut value);
    let path = dir.join("config.json");
    std::fs::write(&path, value.to_string()).unwrap();
    path
}

#[test]
fn oracle_prints_the_closed_form() {
    let out = fracmv(&["oracle", "gaussian-fisher", "--mu1", "1", "--var1", "1", "--mu2", "0", "--var2", "1"]);
    assert!(out.status.success());
    let value: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((value - 1.0).abs() < 1e-12);

    let out = fracmv(&["oracle", "gaussian-fisher", "--mu1", "-1", "--var1", "2", "--mu2", "0", "--var2", "1"]);
    let value: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert!((value - 1.5).abs() < 1e-12, "{value}");
}

#[test]
fn bad_configs_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = edited_config(dir.path(), |v| v["model"]["id"] = "nonesuch".into());
    assert_eq!(fracmv(&["run", "--config", unknown.to_str().unwrap()]).status.code(), Some(1));

    let increasing = edited_config(dir.path(), |v| v["epsilons"] = serde_json::json!([0.1, 0.2, 0.3, 0.4]));
    assert_eq!(fracmv(&["run", "--config", increasing.to_str().unwrap()]).status.code(), Some(1));

    let missing = dir.path().join("absent.json");
    assert_ne!(fracmv(&["validate", "--config", missing.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn validate_passes_and_catches_a_tampered_kernel() {
    let out = fracmv(&["validate", "--config", config("smoke").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let dir = tempfile::tempdir().unwrap();
    let tampered = edited_config(dir.path(), |v| v["validation"] = serde_json::json!({"kernel_constant_scale": 1.05}));
    assert_eq!(fracmv(&["validate", "--config", tampered.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn run_writes_outputs_to_the_requested_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = fracmv(&["run", "--config", config("smoke").to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--jobs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["rates.csv", "fits.json", "report.json"] {
        assert!(out_dir.join(name).is_file(), "{name}");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("sup_dist2"));
}
