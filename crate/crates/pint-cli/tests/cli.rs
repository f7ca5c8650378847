//! End-to-end checks of the `pint` binary: exit codes, output files,
//! determinism, environment overrides.

use std::fs;
use std::path::Path;
use std::process::Command;

fn pint() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pint"))
}

fn small_biharmonic_args(out: &Path) -> Vec<String> {
    [
        "run",
        "--set",
        "h=0.125",
        "--set",
        "dt=0.01",
        "--set",
        "t_final=0.1",
        "--set",
        "seed=5",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([format!("--set"), format!("output={}", out.display())])
    .collect()
}

#[test]
fn converged_run_exits_zero_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bh");
    let status = pint().args(small_biharmonic_args(&out)).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.with_extension("csv").exists());
    assert!(out.with_extension("trace.csv").exists());
    assert!(out.with_extension("json").exists());
    let json = fs::read_to_string(out.with_extension("json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(summary["report"]["converged"], serde_json::Value::Bool(true));
    assert_eq!(summary["config"]["problem"], "biharmonic_1d");
}

#[test]
fn unconverged_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bh");
    let mut args = small_biharmonic_args(&out);
    args.push("--set".into());
    args.push("max_iter=1".into());
    let status = pint().args(args).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn config_errors_exit_two_and_list_fields() {
    let output = pint()
        .args(["run", "--set", "alpha=7", "--set", "tol=-2"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("alpha"), "{stderr}");
    assert!(stderr.contains("tol"), "{stderr}");
}

#[test]
fn identical_seeds_give_byte_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let status = pint()
            .args([
                "run",
                "--set",
                "problem=ch_1d_pint1",
                "--set",
                "h=0.0625",
                "--set",
                "dt=0.001",
                "--set",
                "t_final=0.01",
                "--set",
                "eps2=0.05",
                "--set",
                "alpha=0.1",
                "--set",
                "seed=42",
                "--set",
                &format!("output={}", out.display()),
            ])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    let csv_a = fs::read(a.with_extension("csv")).unwrap();
    let csv_b = fs::read(b.with_extension("csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let tr_a = fs::read(a.with_extension("trace.csv")).unwrap();
    let tr_b = fs::read(b.with_extension("trace.csv")).unwrap();
    assert_eq!(tr_a, tr_b);
}

#[test]
fn env_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sub").join("bh");
    let mut cmd = pint();
    cmd.env(pint_cli::ENV_OUTPUT_DIR, dir.path().join("envdir"))
        .env(pint_cli::ENV_WORKERS, "1");
    let status = cmd.args(small_biharmonic_args(&out)).status().unwrap();
    assert_eq!(status.code(), Some(0));
    // the file name survives, the directory comes from the environment
    assert!(dir.path().join("envdir").join("bh.csv").exists());
}

#[test]
fn sweep_emits_one_csv_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sw");
    let status = pint()
        .args([
            "sweep",
            "--key",
            "alpha",
            "--values",
            "0.1,0.2",
            "--set",
            "h=0.125",
            "--set",
            "dt=0.01",
            "--set",
            "t_final=0.1",
            "--set",
            &format!("output={}", out.display()),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("sw_alpha_0.1.csv").exists());
    assert!(dir.path().join("sw_alpha_0.2.csv").exists());
}

#[test]
fn check_validates_without_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "problem=lin_ch_1d\nalpha=0.01\n").unwrap();
    let output = pint()
        .args(["check", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("lin_ch_1d"));
    // nothing was written
    assert!(!Path::new("pint_run.csv").exists());
}
