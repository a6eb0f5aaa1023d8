//! Runs the `nsctl` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

fn nsctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsctl")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn missing_config_file_is_a_configuration_error() {
    let out = nsctl(&["--config", "/nonexistent/run.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn no_example_is_a_configuration_error() {
    assert_eq!(code(&nsctl(&["sweep"])), 2);
    assert_eq!(code(&nsctl(&["--example", "3"])), 2);
    assert_eq!(code(&nsctl(&["--bogus-flag"])), 2);
}

#[test]
fn invalid_config_contents_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"example": 1, "m_list": [32]}"#).unwrap();
    assert_eq!(code(&nsctl(&["--config", cfg.to_str().unwrap()])), 2);
    std::fs::write(&cfg, "not json").unwrap();
    assert_eq!(code(&nsctl(&["--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn sweep_writes_a_deterministic_table() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"example": 1, "m_list": [9, 17], "gamma_list": [1e-4, 1e-2], "mode": "sweep"}"#,
    )
    .unwrap();
    for dir in [a.path(), b.path()] {
        let out = nsctl(&["--config", cfg.to_str().unwrap(), "--out", &out_arg(dir)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ta = std::fs::read(a.path().join("table1.csv")).unwrap();
    let tb = std::fs::read(b.path().join("table1.csv")).unwrap();
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,alpha,gamma,err_y_rel,err_p,err_chi_linf,newton_iters,status");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].ends_with(",ok"));
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 8);
    }
}

#[test]
fn example2_sweep_leaves_chi_column_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsctl(&["sweep", "--example", "2", "--m", "9", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("table2.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "1.00000000000000e-12");
    assert!(!row[3].is_empty() && !row[4].is_empty());
    assert!(row[5].is_empty());
}

#[test]
fn kkt_mode_writes_fields_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsctl(&["kkt", "--example", "1", "--m", "9", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let vtk = dir.path().join("kkt_m9_a1e-4_g1e-4.vtk");
    let grid = nonsmooth_control::fe::vtk::read(&vtk).unwrap();
    for name in ["y", "p", "chi", "u"] {
        assert_eq!(grid.field(name).unwrap().len(), 100);
    }
    assert!(dir.path().join("kkt_report.json").exists());
    assert!(dir.path().join("kkt.csv").exists());
}

#[test]
fn state_regpath_and_check_modes() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    for (mode, file) in [
        ("state", "state_report.json"),
        ("regpath", "regpath.csv"),
        ("check", "check_report.json"),
    ] {
        let out = nsctl(&[mode, "--example", "1", "--m", "17", "--out", &o]);
        assert_eq!(code(&out), 0, "{mode}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join(file).exists(), "{mode}");
    }
    assert!(dir.path().join("state_m17.vtk").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("check_report.json")).unwrap()).unwrap();
    assert_eq!(report[0]["checks"]["strong_sign"]["passed"], true);
}

#[test]
fn mode_flag_selects_the_mode_without_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsctl(&["--example", "custom", "--mode", "kkt", "--m", "8", "--out", &out_arg(dir.path())]);
    // Custom data needs its block from a configuration file.
    assert_eq!(code(&out), 2);
    let cfg = dir.path().join("custom.json");
    std::fs::write(&cfg, r#"{"example": "custom", "m_list": [8], "custom": {"f": 20, "y_d": 0.5}}"#).unwrap();
    let out = nsctl(&["--config", cfg.to_str().unwrap(), "--mode", "kkt", "--out", &out_arg(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("kkt.csv").exists());
}

#[test]
fn selftest_passes() {
    let out = nsctl(&["selftest"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
