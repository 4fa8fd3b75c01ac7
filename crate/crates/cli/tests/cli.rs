use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

const LAYER: &str = r#"{"model": {"model": "isentropic2d", "params": {"rho0": 1, "V": -0.1, "u_inf": 0.01, "mu": 0.1}}"#;

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_layerstab"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn with(extra: &str) -> String {
    format!("{LAYER}, {extra}}}")
}

#[test]
fn profile_writes_csv_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["profile"], &format!("{LAYER}}}"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/profile.csv")).unwrap();
    assert!(csv.starts_with("# schema=1\nx1,U_1,U_2,U_3,dU_1,dU_2,dU_3"), "{}", &csv[..80]);
    let json = std::fs::read_to_string(dir.path().join("out/profile.json")).unwrap();
    assert!(json.contains("\"schema\": 1"));
}

#[test]
fn detached_inflow_profile_exits_with_audit_failure() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"model": {"model": "isentropic2d", "params": {"rho0": 1, "V": 0.1, "u_inf": 1, "mu": 0.1}}}"#;
    let out = run(dir.path(), &["profile"], config);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no connection") && err.contains("attach"), "{err}");
}

#[test]
fn malformed_json_is_a_config_error_with_location() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["check"], "{\"model\": {\"model\": \"isentropic2d\",\n  \"params\": }");
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn invalid_field_is_reported_with_its_path() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["check"], &with(r#""region": {"radius": -1}"#));
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("region.radius"));
}

#[test]
fn failed_audit_only_fails_the_exit_status_when_strict() {
    // zero normal velocity makes the wall characteristic
    let config = r#"{"model": {"model": "isentropic2d", "params": {"rho0": 1, "V": 0, "u_inf": 0, "mu": 0.1}}}"#;
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["check"], config).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["check", "--strict"], config).status.code(), Some(2));
    let report = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    assert!(report.contains("characteristic"));
}

#[test]
fn simulate_is_deterministic_for_a_fixed_seed() {
    let config = with(
        r#""simulate": {"nodes": 201, "x_max": 20, "evolve": {"dt": 0.05, "t_end": 2}, "nonlinear": {"cells": 100, "t_end": 2}}"#,
    );
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = run(dir.path(), &["simulate", "--seed", "7"], &config);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["simulate.json", "trajectory_xi0.5.csv", "nonlinear.csv"] {
        let x = std::fs::read(a.path().join("out").join(name)).unwrap();
        let y = std::fs::read(b.path().join("out").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let c = TempDir::new().unwrap();
    run(c.path(), &["simulate", "--seed", "8"], &config);
    assert_ne!(
        std::fs::read(a.path().join("out/simulate.json")).unwrap(),
        std::fs::read(c.path().join("out/simulate.json")).unwrap()
    );
}

#[test]
fn energy_audit_is_feasible_for_a_small_layer() {
    let dir = TempDir::new().unwrap();
    let out = run(dir.path(), &["energy-audit", "--strict"], &with(r#""energy": {"evolve": {"dt": 0.05, "t_end": 5}}"#));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/energy_xi0.csv")).unwrap();
    assert!(csv.starts_with("# schema=1\nt,E_s,L2,B_h"));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"sweep": {"grid": {"axes": "velocity-drift", "base": {"rho0": 1, "V": -0.1, "u_inf": 0.01, "mu": 0.1},
        "v_wall": [], "u_inf": [0.01]}}}"#;
    let out = run(dir.path(), &["sweep", "--threads", "1"], config);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn condition_d_passes_on_the_trivial_layer() {
    let dir = TempDir::new().unwrap();
    let config = r#"{"model": {"model": "isentropic2d", "params": {"rho0": 1, "V": -0.1, "u_inf": 0, "mu": 0.1}}}"#;
    let out = run(dir.path(), &["condition-d", "--strict"], config);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("out/condition_d.json")).unwrap();
    assert!(report.contains("\"passed\": true"));
}

#[test]
fn missing_config_flag_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_layerstab")).arg("check").output().unwrap();
    assert_eq!(out.status.code(), Some(64));
}
