//! End-to-end checks of the binary: exit-code contract, byte-determinism of
//! the JSON report, CSV emission, and the shipped reproduction fixtures.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_riskshare")
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn shipped_reproductions_all_pass() {
    for name in [
        "reproduce_example_1",
        "reproduce_example_2",
        "reproduce_example_3b",
        "reproduce_example_5",
        "reproduce_figure_2",
    ] {
        let path = scenarios_dir().join(format!("{name}.json"));
        let out = run(&["reproduce", "--scenario", path.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn json_report_is_byte_deterministic() {
    let path = scenarios_dir().join("equilibrium_two_agent.json");
    let a = run(&["equilibrium", "--scenario", path.to_str().unwrap(), "--seed", "9"]);
    let b = run(&["equilibrium", "--scenario", path.to_str().unwrap(), "--seed", "9"]);
    assert!(a.status.success() && b.status.success());
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout, "two runs produced different JSON bytes");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        "bad_theta.json",
        r#"{
            "space": {"atoms": {"probabilities": [0.5, 0.5]}},
            "payoff": [1.0, 2.0],
            "agents": [
                {"utility": {"family": "power", "alpha": 2.0}, "attitude": "risk_seeking"},
                {"utility": {"family": "power", "alpha": 3.0}, "attitude": "risk_seeking"}
            ],
            "endowments": {"kind": "proportional", "theta": [0.5, 0.4]},
            "task": {"kind": "equilibrium"}
        }"#,
    );
    let out = run(&["equilibrium", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("endowments.theta"));
}

#[test]
fn task_mismatch_exits_2() {
    let path = scenarios_dir().join("equilibrium_two_agent.json");
    let out = run(&["improve", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_certificate_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // A proportional split of a nonconstant payoff among strict risk
    // seekers is never optimal: the requested certificate comes back
    // negative.
    let path = write_scenario(
        dir.path(),
        "not_optimal.json",
        r#"{
            "space": {"atoms": {"probabilities": [0.5, 0.5]}},
            "payoff": [1.0, 2.0],
            "agents": [
                {"utility": {"family": "power", "alpha": 2.0}, "attitude": "risk_seeking"},
                {"utility": {"family": "power", "alpha": 2.0}, "attitude": "risk_seeking"}
            ],
            "endowments": {"kind": "equal"},
            "task": {"kind": "pareto"}
        }"#,
    );
    let out = run(&["pareto", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["tables"][0]["rows"][0][0], serde_json::json!(false));
}

#[test]
fn csv_emits_tables_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let path = scenarios_dir().join("upf_heterogeneous_seekers.json");
    let out = run(&[
        "upf",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let upf = std::fs::read_to_string(out_dir.join("upf.csv")).unwrap();
    let mut lines = upf.lines();
    assert_eq!(lines.next().unwrap(), "lambda_1,lambda_2,utility_1,utility_2");
    assert!(lines.count() >= 41);
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn batch_mode_runs_directory() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["reproduce_example_1", "reproduce_figure_2"] {
        std::fs::copy(
            scenarios_dir().join(format!("{name}.json")),
            dir.path().join(format!("{name}.json")),
        )
        .unwrap();
    }
    let out_dir = dir.path().join("out");
    let out = Command::new(bin())
        .args([
            "reproduce",
            "--scenario",
            dir.path().to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .env("RISKSHARE_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("reproduce_example_1").join("report.json").exists());
    assert!(out_dir.join("reproduce_figure_2").join("report.json").exists());
}

#[test]
fn equilibrium_exit_reflects_validity() {
    let path = scenarios_dir().join("equilibrium_homogeneous.json");
    let out = run(&["equilibrium", "--scenario", path.to_str().unwrap(), "--oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["certificates"][0]["valid"].as_bool().unwrap());
    // Oracle cross-check table is attached on small instances.
    let names: Vec<&str> = report["tables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"oracle_individual_optima"), "{names:?}");
}
