use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn protmeas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protmeas")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const BELL: &str = r#"
[scenario]
name = "bell"
experiment = "E6"
trials = 20
seed = 3

[system]
kind = "qubits"
n = 2

[bell]
alpha = [0.6, 0.0]
beta = [0.8, 0.0]
"#;

#[test]
fn list_experiments_names_all_eight() {
    let out = protmeas(&["list-experiments"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for n in 1..=8 {
        assert!(text.contains(&format!("E{n} ")), "{text}");
    }
}

#[test]
fn shipped_scenarios_validate() {
    for entry in fs::read_dir(scenario("")).unwrap() {
        let path = entry.unwrap().path();
        let out = protmeas(&["validate", path.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn run_writes_json_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bell.toml", BELL);
    let out_dir = dir.path().join("out");
    let out = protmeas(&["run", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let results: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    assert_eq!(results["seed"], 11);
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn csv_format_writes_one_file_per_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bell.toml", BELL);
    let out_dir = dir.path().join("csv");
    let out = protmeas(&["run", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    for name in ["classification.csv", "disturbance.csv", "summary.csv", "checks.csv", "metadata.json"] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    let header = fs::read_to_string(out_dir.join("disturbance.csv")).unwrap();
    assert!(header.starts_with("outcome,probability,"));
}

#[test]
fn invalid_config_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bad.toml", &BELL.replace("trials = 20", "trials = 0"));
    let out = protmeas(&["run", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario.trials"));

    let out = protmeas(&["validate", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let missing = dir.path().join("absent.toml");
    let out = protmeas(&["validate", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.toml"));
}

#[test]
fn zero_threads_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bell.toml", BELL);
    let out = protmeas(&["run", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--threads", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn domain_failure_exits_two() {
    // orthogonal forward and backward states have no two-state description
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("e7_two_state_protection.toml"))
        .unwrap()
        .replace("forward = [[1.0, 0.0], [0.4, 0.0], [-0.2, 0.0]]", "forward = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]")
        .replace("backward = [[0.6, 0.1], [-0.5, 0.0], [0.3, 0.4]]", "backward = [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]");
    let config = write(dir.path(), "narrow.toml", &text);
    let out = protmeas(&["run", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E7"));
}

#[test]
fn narrow_pointer_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(scenario("e8_drift_tracking.toml")).unwrap().replace("delta = 0.05", "delta = 0.02");
    let config = write(dir.path(), "narrow.toml", &text);
    let out = protmeas(&["run", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pointer width"));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "bell.toml", BELL);
    let blocker = write(dir.path(), "file", "");
    let out = protmeas(&["run", config.to_str().unwrap(), "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
