//! End-to-end tests of the binary: exit-code contract, report schema,
//! reproducibility and the sample stream format.

use std::path::Path;
use std::process::{Command, Output};

fn spinlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn kms_check_field_model_passes_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let output = spinlab(&[
        "kms-check",
        "--model",
        "field",
        "--lambda",
        "0",
        "--boundary",
        "north",
        "--order",
        "24",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let report = read_json(&out);
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["seed"], 1);
    let pairs = report["pairs"].as_array().unwrap();
    assert!(pairs.len() >= 5);
    for p in pairs {
        assert!(p["residual"].as_f64().unwrap().abs() <= 1e-8);
        assert!(p["f"].is_string() && p["g"].is_string());
        assert!(p["stderr"].is_number() && p["z"].is_number());
    }
    assert!(report["model_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn beta_mismatch_fails_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let output = spinlab(&[
        "kms-check",
        "--model",
        "heisenberg1d",
        "--engine",
        "mcmc",
        "--window",
        "16",
        "--boundary",
        "periodic",
        "--sweeps",
        "20000",
        "--beta-sample",
        "0.5",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
    let report = read_json(&out);
    assert_eq!(report["verdict"], "fail");
}

#[test]
fn malformed_potential_exits_one_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "manifold = \"sphere2\"\ndimension = 1\ntranslation_invariant = true\n\n\
         [[term]]\noffsets = [[0]]\nexpr = \"-1.0*sz(0\"\n",
    )
    .unwrap();
    let output = spinlab(&["kms-check", "--model", bad.to_str().unwrap(), "--lambda", "0"]);
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("parse error"), "stderr: {stderr}");
}

#[test]
fn unknown_flags_exit_one() {
    let output = spinlab(&["kms-check", "--frobnicate"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn list_models_and_describe() {
    let output = spinlab(&["list-models"]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    let n = stdout
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with("use "))
        .count();
    assert!(n >= 4, "{stdout}");

    let output = spinlab(&["list-models", "field"]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("coth(h) - 1/h"), "{stdout}");

    let output = spinlab(&["list-models", "nope"]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn sample_writes_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("samples.jsonl");
    let output = spinlab(&[
        "sample",
        "--model",
        "heisenberg1d",
        "--window",
        "8",
        "--boundary",
        "periodic",
        "--sweeps",
        "1100",
        "--burn-in",
        "1000",
        "--thin",
        "10",
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10);
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["sweep"].is_u64());
        assert!(v["H"].is_number());
        let config = v["config"].as_object().unwrap();
        assert_eq!(config.len(), 8);
        // Sphere sites carry three coordinates.
        assert_eq!(config["0"].as_array().unwrap().len(), 3);
    }
}

#[test]
fn seeded_runs_are_byte_identical_modulo_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let output = spinlab(&[
            "kms-check",
            "--model",
            "heisenberg1d",
            "--engine",
            "mcmc",
            "--window",
            "8",
            "--boundary",
            "periodic",
            "--sweeps",
            "4000",
            "--seed",
            "9",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{output:?}");
        let mut v = read_json(&out);
        v.as_object_mut().unwrap().remove("runtime_sec");
        serde_json::to_string_pretty(&v).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "model = \"field\"\nlambda = \"0\"\nboundary = \"north\"\nquadrature_order = 16\nseed = 3\n",
    )
    .unwrap();
    let out = dir.path().join("r.json");
    let output = spinlab(&[
        "kms-check",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let report = read_json(&out);
    // The flag wins over the config file.
    assert_eq!(report["seed"], 11);
}

#[test]
fn csv_projection_of_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let output = spinlab(&[
        "kms-check",
        "--model",
        "field",
        "--lambda",
        "0",
        "--boundary",
        "north",
        "--csv",
        csv.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("f,g,residual,stderr,z,n_effective"));
    assert!(text.lines().count() >= 6);
}

#[test]
fn compat_and_tilt_checks_pass() {
    let output = spinlab(&[
        "compat-check",
        "--model",
        "heisenberg1d",
        "--lambda",
        "0",
        "--lambda-outer",
        "0;1",
        "--boundary",
        "north",
        "--order",
        "12",
        "--inner-order",
        "12",
    ]);
    assert!(output.status.success(), "{output:?}");

    let output = spinlab(&[
        "tilt-check",
        "--model",
        "field",
        "--lambda",
        "0",
        "--boundary",
        "north",
        "--order",
        "16",
    ]);
    assert!(output.status.success(), "{output:?}");
}

#[test]
fn dlr_check_passes_on_periodic_window() {
    let output = spinlab(&[
        "dlr-check",
        "--model",
        "heisenberg1d",
        "--window",
        "12",
        "--boundary",
        "periodic",
        "--lambda",
        "5",
        "--sweeps",
        "6000",
        "--seed",
        "3",
    ]);
    assert!(output.status.success(), "{output:?}");

    // Free boundary is rejected for this check.
    let output = spinlab(&[
        "dlr-check",
        "--model",
        "heisenberg1d",
        "--window",
        "12",
        "--boundary",
        "free",
        "--lambda",
        "5",
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn starved_run_is_inconclusive_with_exit_three() {
    let output = spinlab(&[
        "kms-check",
        "--model",
        "heisenberg1d",
        "--engine",
        "mcmc",
        "--window",
        "8",
        "--boundary",
        "periodic",
        "--sweeps",
        "1020",
        "--seed",
        "2",
    ]);
    assert_eq!(output.status.code(), Some(3), "{output:?}");
}

#[test]
fn bench_prints_a_table() {
    let output = spinlab(&["bench"]);
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("metropolis sweeps"), "{stdout}");
}
