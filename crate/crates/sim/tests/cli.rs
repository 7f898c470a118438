use std::path::Path;
use std::process::Command;

use rfs_fuse::output::{AGGREGATE_HEADER, STEP_HEADER};
use rfs_fuse::ExperimentConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rfs-fuse"))
}

fn shipped(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::load(&path).unwrap()
}

#[test]
fn shipped_configs_match_presets() {
    assert_eq!(shipped("linear_homogeneous.json"), ExperimentConfig::linear_homogeneous());
    assert_eq!(shipped("linear_heterogeneous.json"), ExperimentConfig::linear_heterogeneous());
    assert_eq!(shipped("rangebearing.json"), ExperimentConfig::rangebearing());
}

#[test]
fn preset_output_round_trips() {
    let out = bin().args(["preset", "rangebearing"]).output().unwrap();
    assert!(out.status.success());
    let parsed = ExperimentConfig::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(parsed, ExperimentConfig::rangebearing());
}

#[test]
fn run_writes_both_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ExperimentConfig::rangebearing();
    config.scenario.duration = 12;
    config.scenario.targets.retain(|t| t.birth_step <= 11);
    for t in &mut config.scenario.targets {
        t.death_step = t.death_step.min(13);
    }
    let path = dir.path().join("c.json");
    std::fs::write(&path, config.to_json()).unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out)
        .args(["--runs", "1", "--mode", "cc"])
        .status()
        .unwrap();
    assert!(status.success());

    let steps = std::fs::read_to_string(out.join("steps.csv")).unwrap();
    let mut lines = steps.lines();
    assert_eq!(lines.next().unwrap(), STEP_HEADER.join(","));
    assert_eq!(lines.count(), 12 * 4);
    let agg = std::fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let mut lines = agg.lines();
    assert_eq!(lines.next().unwrap(), AGGREGATE_HEADER.join(","));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.starts_with("cc_only,0,")));
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\"scenario\": 3}").unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
