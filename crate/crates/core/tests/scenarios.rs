use std::fs;
use std::path::Path;

use protmeas::scenario::{emit, run_scenario, to_json, Format, Payload, RunSettings, ScenarioConfig};

fn load(name: &str) -> ScenarioConfig {
    ScenarioConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)).unwrap()
}

fn small_survival() -> ScenarioConfig {
    let mut c = load("e2_survival_sweep.toml");
    c.scenario.trials = 300;
    c.survival.as_mut().unwrap().epsilons = vec![1e-2, 3e-3];
    c
}

#[test]
fn same_seed_gives_byte_identical_payloads() {
    let c = small_survival();
    let a = run_scenario(&c, RunSettings::default()).unwrap();
    let b = run_scenario(&c, RunSettings { threads: Some(3) }).unwrap();
    assert_eq!(to_json(&a.payload).unwrap(), to_json(&b.payload).unwrap());
    assert_eq!(a.metadata.config_hash, b.metadata.config_hash);
}

#[test]
fn different_seed_changes_samples() {
    let mut c = small_survival();
    let a = run_scenario(&c, RunSettings::default()).unwrap();
    c.scenario.seed += 1;
    let b = run_scenario(&c, RunSettings::default()).unwrap();
    assert_ne!(a.table("survival").unwrap().column("survived"), b.table("survival").unwrap().column("survived"));
    // exact columns do not depend on sampling
    assert_eq!(a.table("survival").unwrap().column("exact"), b.table("survival").unwrap().column("exact"));
}

#[test]
fn emitted_json_round_trips_exactly() {
    let bundle = run_scenario(&load("e4_phase_recovery.toml"), RunSettings::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit(&bundle, Format::Json, dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("results.json")).unwrap();
    let back: Payload = serde_json::from_str(&text).unwrap();
    assert_eq!(back, bundle.payload);
    assert_eq!(to_json(&back).unwrap(), text);
}

#[test]
fn emitted_csv_matches_tables() {
    let bundle = run_scenario(&load("e7_two_state_protection.toml"), RunSettings::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit(&bundle, Format::Csv, dir.path()).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("two_state.csv")).unwrap();
    let table = bundle.table("two_state").unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, table.columns);
    let times: Vec<f64> = reader.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(times, table.column("time").unwrap());
}

#[test]
fn output_filter_keeps_only_requested_tables() {
    let mut c = load("e6_bell_nondemolition.toml");
    c.scenario.outputs = vec!["disturbance".into()];
    let b = run_scenario(&c, RunSettings::default()).unwrap();
    assert_eq!(b.payload.tables.keys().collect::<Vec<_>>(), ["disturbance"]);
    c.scenario.outputs = vec!["nope".into()];
    assert!(run_scenario(&c, RunSettings::default()).unwrap_err().is_validation());
}

#[test]
fn tracking_scenario_passes() {
    let b = run_scenario(&load("e8_drift_tracking.toml"), RunSettings::default()).unwrap();
    assert!(b.all_passed(), "{:?}", b.payload.checks);
}
