use std::path::Path;
use std::process::Command;

use rbvar::cli::{main_with_args, RunManifest};

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = main_with_args(std::iter::once("rbvar").chain(args.iter().copied()), &mut out).unwrap();
    (code, String::from_utf8(out).unwrap())
}

fn manifest(dir: &Path, command: &str) -> RunManifest {
    let text = std::fs::read_to_string(dir.join(format!("{command}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn plan_prints_json_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out) = run(&[
        "plan",
        "--epsilon",
        "0.01",
        "--m",
        "100",
        "--r",
        "1e-4",
        "--u-mix",
        "0.5",
        "--output-dir",
        d,
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["N"], 174);
    assert!(dir.path().join("plan.json").exists());
    let m = manifest(dir.path(), "plan");
    assert_eq!(m.command, "plan");
    assert!(m.finished_unix >= m.started_unix);
    assert!(m.outputs.iter().all(|p| p.exists()));
}

#[test]
fn plan_csv_and_explicit_variance() {
    let (code, out) = run(&[
        "--format",
        "csv",
        "plan",
        "--epsilon",
        "0.05",
        "--m",
        "10",
        "--r",
        "1e-3",
        "--variance",
        "0.25",
    ]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "N,N_raw,N_trivial,variance_used,H,delta,epsilon,m,r,u,d,eta"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], row[2]);
}

#[test]
fn bound_curve_writes_csv_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _) = run(&[
        "bound-curve",
        "--sweep",
        "qubits",
        "--qubits-max",
        "4",
        "--output-dir",
        d,
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("bound_curve.csv")).unwrap();
    let header = text.lines().next().unwrap();
    for col in [
        "qubits",
        "m",
        "bound_spamfree",
        "bound_spam_derived",
        "N_spamfree",
        "N_trivial",
    ] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
    // Three default infidelities × four qubit counts.
    assert_eq!(text.lines().count(), 1 + 3 * 4);
    assert_eq!(manifest(dir.path(), "bound_curve").command, "bound_curve");
}

#[test]
fn simulate_then_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"qubits": 1, "m_list": [1, 10, 50], "N": 40,
            "noise": {"type": "depolarizing", "r": 0.004},
            "spam": {"target_pauli": "Z"}, "shots": 500, "record_sequences": true}"#,
    )
    .unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, out) = run(&[
        "--seed",
        "3",
        "--threads",
        "2",
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        d,
    ]);
    assert_eq!(code, 0);
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["dataset"]["seed"], 3);
    assert!(summary["shot_noise"]["epsilon_l"].as_f64().unwrap() > 0.0);
    for f in ["dataset.csv", "dataset.json", "sequences.csv", "simulate.manifest.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(manifest(dir.path(), "simulate").seed, Some(3));

    let (code, out) = run(&["fit", "--dataset", dir.path().join("dataset.json").to_str().unwrap()]);
    assert_eq!(code, 0);
    let fit: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((fit["r_hat"].as_f64().unwrap() - 0.004).abs() < 1e-3);
    // CSV input needs the qubit count.
    let csv = dir.path().join("dataset.csv");
    assert!(main_with_args(["rbvar", "fit", "--dataset", csv.to_str().unwrap()], &mut Vec::new()).is_err());
    let (code, _) = run(&["fit", "--dataset", csv.to_str().unwrap(), "--qubits", "1"]);
    assert_eq!(code, 0);
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(
        &cfg,
        r#"{"qubits": 2, "m_list": [3, 12], "N": 64,
            "noise": {"type": "unitary", "axis": [1, 1, 0], "theta": 0.1},
            "spam": {"target_pauli": "ZZ"}}"#,
    )
    .unwrap();
    let go = |threads: &str| {
        let sub = tempfile::tempdir().unwrap();
        let (_, out) = run(&[
            "--threads",
            threads,
            "--format",
            "csv",
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--output-dir",
            sub.path().to_str().unwrap(),
        ]);
        out
    };
    let one = go("1");
    assert_eq!(one, go("4"));
    assert!(one.lines().next().unwrap().starts_with("m,K_mN"));
}

#[test]
fn verify_single_scope_passes() {
    let (code, out) = run(&["verify", "--scope", "planner-roundtrip"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["plan"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(
        run(&[
            "plan",
            "--epsilon",
            "0.01",
            "--m",
            "10",
            "--r",
            "1e-3",
            "--u",
            "1",
            "--u-mix",
            "1"
        ])
        .0,
        2
    );
    let (code, out) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("plan") && out.contains("simulate"));
}

#[test]
fn invalid_values_are_errors() {
    let mut sink = Vec::new();
    assert!(main_with_args(
        ["rbvar", "plan", "--epsilon", "0.01", "--m", "10", "--r", "0.9"],
        &mut sink
    )
    .is_err());
    assert!(main_with_args(["rbvar", "--threads", "0", "verify"], &mut sink).is_err());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_rbvar");
    let ok = Command::new(bin)
        .args(["plan", "--epsilon", "0.01", "--m", "100", "--r", "1e-4"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin)
        .args(["plan", "--epsilon", "0.01", "--m", "100", "--r", "0.5"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
    let version = Command::new(bin).arg("--version").output().unwrap();
    assert!(String::from_utf8_lossy(&version.stdout).contains(env!("CARGO_PKG_VERSION")));
}
