//! End-to-end checks of the binary: emitted configs drive real runs, the
//! output root honours the environment override, and every exit code in the
//! contract is reachable.

use std::fs;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pullback-lab");

fn run_bin(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary should spawn")
}

#[test]
fn list_scenarios_names_every_builtin() {
    let out = run_bin(&["list-scenarios"], &[]);
    let text = String::from_utf8(out.stdout).unwrap();
    println!("{text}");
    assert!(out.status.success());
    for name in [
        "nd16_autonomous",
        "nonautonomous_limit",
        "moving_bump_counterexample",
        "heat_benchmark",
        "linear_decay",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn emitted_config_runs_under_the_env_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let emit = run_bin(&["emit-default-config", "moving_bump_counterexample"], &[]);
    assert!(emit.status.success());
    let cfg_path = dir.path().join("config.ini");
    fs::write(&cfg_path, &emit.stdout).unwrap();

    let root = dir.path().join("artifacts");
    let out = run_bin(
        &["run", cfg_path.to_str().unwrap()],
        &[("PULLBACK_LAB_OUTPUT_ROOT", root.to_str().unwrap())],
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    println!("{text}");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("PASS noncommutation"));
    // Artifacts landed under the override, not under the config's output_dir.
    assert!(root.join("moving_bump_counterexample/gates.csv").is_file());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn gate_failure_exits_one() {
    // The moving bump is the built-in counterexample: its forcing mass
    // escapes backward, so the full condition audit cannot pass.
    let dir = tempfile::tempdir().unwrap();
    let emit = run_bin(&["emit-default-config", "moving_bump_counterexample"], &[]);
    let patched = String::from_utf8(emit.stdout)
        .unwrap()
        .replace("kinds = noncommutation", "kinds = conditions");
    let cfg_path = dir.path().join("config.ini");
    fs::write(&cfg_path, patched).unwrap();

    let root = dir.path().join("artifacts");
    let out = run_bin(
        &["run", cfg_path.to_str().unwrap()],
        &[("PULLBACK_LAB_OUTPUT_ROOT", root.to_str().unwrap())],
    );
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    println!("{text}");
    assert_eq!(out.status.code(), Some(1));
    assert!(text.contains("FAIL conditions"));
    // A failed gate still leaves its evidence on disk.
    assert!(root.join("moving_bump_counterexample/conditions.csv").is_file());
}

#[test]
fn config_and_usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.ini");
    fs::write(&cfg_path, "[grid]\nn = 32\n").unwrap(); // no scenario anywhere
    let out = run_bin(&["run", cfg_path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario"));

    let missing = run_bin(&["run", "/nonexistent/config.ini"], &[]);
    assert_eq!(missing.status.code(), Some(2));

    let unknown = run_bin(&["emit-default-config", "no_such_scenario"], &[]);
    assert_eq!(unknown.status.code(), Some(2));

    let usage = run_bin(&["frobnicate"], &[]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
