use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use contestlab::pipeline::{ScenarioConfig, ScenarioId};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_contestlab"));
    c.env_remove("CONTESTLAB_OUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["--seed", "7", "--threads", "1", "--out", s(&a), "simulate"]).status.success());
    assert!(run(&["--seed", "7", "--threads", "2", "--out", s(&b), "simulate"]).status.success());
    let x = std::fs::read(a.join("panel.csv")).unwrap();
    assert!(!x.is_empty());
    assert_eq!(x, std::fs::read(b.join("panel.csv")).unwrap());
}

#[test]
fn calibration_config_prints_moment_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo().join("configs/calibration.json");
    let out = run(&["--config", s(&cfg), "--out", s(dir.path()), "simulate"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("performance_favorite"));
    assert!(text.contains("pass") || text.contains("FAIL"));
}

#[test]
fn malformed_config_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"scenario\": \"table2\",\n  \"seed\": }").unwrap();
    let out = run(&["--config", s(&cfg), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 3 column"), "{err}");
}

#[test]
fn unknown_scenario_and_missing_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.json");
    std::fs::write(&cfg, r#"{"scenario": "table9", "seed": 1}"#).unwrap();
    assert_eq!(run(&["--config", s(&cfg), "simulate"]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(run(&["--config", s(&missing), "simulate"]).status.code(), Some(2));
}

#[test]
fn missing_columns_exit_3_naming_them() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("p.csv");
    std::fs::write(&panel, "tournament_id,stage,ability_ratio\n1,1,1.05\n").unwrap();
    let out = run(&["estimate", "--panel", s(&panel), "--scenario", "table2", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("performance_underdog") && err.contains("underdog_id"), "{err}");
    assert!(!err.contains("ability_ratio,"), "{err}");
}

#[test]
fn estimate_round_trips_a_simulated_panel() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    assert!(run(&["--seed", "3", "--out", s(&sim), "simulate"]).status.success());
    let out_dir = dir.path().join("t6");
    let out = run(&["estimate", "--panel", s(&sim.join("panel.csv")), "--scenario", "table6", "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("estimates.json")).unwrap()).unwrap();
    let rows = json.as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let iv = rows.iter().find(|r| r["panel"] == "B: 2SLS").unwrap();
    assert!(iv["result"]["first_stage"]["f_stat"].as_f64().unwrap() > 10.0);
}

#[test]
fn model_curves_write_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", s(dir.path()), "model-curves", "--variant", "choking", "--param", "0.2"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("choking.csv")).unwrap();
    assert_eq!(csv.lines().count(), 202);
    let svg = std::fs::read_to_string(dir.path().join("choking.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("1.3237"), "peak annotation missing");
}

#[test]
fn theta_below_one_is_an_argument_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--out", s(dir.path()), "model-curves", "--theta-min", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("CONTESTLAB_OUT", dir.path())
        .args(["model-curves", "--variant", "baseline"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("baseline.csv").exists());
}

#[test]
fn checked_in_configs_match_the_defaults() {
    for id in ScenarioId::ALL {
        let path = repo().join("configs").join(format!("{}.json", id.name()));
        let loaded = ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(loaded, ScenarioConfig::default_for(id, 42), "{}", id.name());
    }
}
