//! Command-line contract: subcommands, determinism and exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mcanm(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mcanm"));
    cmd.args(args).env_remove("MCANM_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for f in [&a, &b] {
        let out = mcanm(&["gen", "--seed", "7", "--n", "32", "--k", "2", "--l", "2", "--m", "20", "--out", path(f)], &[]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = mcanm(&["gen", "--seed", "8", "--n", "32", "--k", "2", "--l", "2", "--m", "20"], &[]);
    assert_ne!(c.stdout, fs::read(&a).unwrap());
}

#[test]
fn solve_and_certify_full_data_instance() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    assert!(mcanm(&["gen", "--seed", "3", "--n", "33", "--k", "2", "--l", "2", "--out", path(&inst)], &[]).status.success());

    let out = mcanm(&["solve", "--instance", path(&inst)], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["rmse_vs_truth"].as_f64().unwrap() < 1e-7);

    let out = mcanm(&["certify", "--instance", path(&inst), "--grid-density", "200"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["valid"], true);
    assert_eq!(report["seed"], 3);
    assert!(report["off_support_margin"].as_f64().unwrap() > 0.0);
}

#[test]
fn solver_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let cfg = dir.path().join("solver.json");
    assert!(mcanm(&["gen", "--seed", "1", "--n", "32", "--k", "3", "--l", "1", "--m", "10", "--out", path(&inst)], &[]).status.success());
    fs::write(&cfg, r#"{"max_iter": 3}"#).unwrap();
    let out = mcanm(&["solve", "--instance", path(&inst), "--config", path(&cfg)], &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_config_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"N": 16, "M_values": [8, 40]}"#).unwrap();
    let out = mcanm(&["phase", "--config", path(&cfg), "--out", path(dir.path())], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("M_values"));

    let inst = dir.path().join("inst.json");
    fs::write(&inst, r#"{"N": 8}"#).unwrap();
    assert_eq!(mcanm(&["solve", "--instance", path(&inst)], &[]).status.code(), Some(2));
}

#[test]
fn phase_writes_identical_tables_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.json");
    fs::write(
        &cfg,
        r#"{"N": 24, "K": 2, "L_values": [1, "inf"], "M_values": [12, 24], "trials": 2, "seed": 9}"#,
    )
    .unwrap();
    let one = dir.path().join("one");
    let two = dir.path().join("two");
    let out = mcanm(&["phase", "--config", path(&cfg), "--out", path(&one), "--threads", "1"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = mcanm(&["phase", "--config", path(&cfg), "--out", path(&two), "--threads", "1"], &[("MCANM_THREADS", "3")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["success_rates.csv", "curve.csv", "summary.json"] {
        assert_eq!(fs::read(one.join(f)).unwrap(), fs::read(two.join(f)).unwrap(), "{f} differs");
    }
    let rates = fs::read_to_string(one.join("success_rates.csv")).unwrap();
    assert!(rates.starts_with("L,M,success_rate,mean_rmse,nonconverged\n"));
    assert_eq!(rates.lines().count(), 5);
    assert!(rates.contains("inf,24,1,"));
    assert_eq!(fs::read_to_string(one.join("curve.csv")).unwrap(), "L,M_ref\n1,44\ninf,28\n");
}
