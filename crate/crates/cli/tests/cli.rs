use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn youngfock(config: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_youngfock"))
        .arg("--config")
        .arg(config)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn kernel_suite_passes_for_classical_weight() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"weight": {"kind": "classical"}, "dim": 40, "suite": "kernel"}"#,
    );
    let out = youngfock(&cfg, &[]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&tmp.path().join("report"));
    assert_eq!(r["schema_version"], 1);
    let checks = r["checks"].as_array().unwrap();
    let kernel = checks
        .iter()
        .find(|c| c["name"] == "kernel.exponential")
        .unwrap();
    assert_eq!(kernel["verdict"], "pass");
    assert!(kernel["measured"].as_f64().unwrap() <= kernel["threshold"].as_f64().unwrap());
    assert_eq!(r["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn missing_dim_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "{\n  \"weight\": {\"kind\": \"classical\"},\n  \"suite\": \"kernel\"\n}\n",
    );
    let out = youngfock(&cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing field `dim`"), "{err}");
    assert!(err.contains("config.json:4:"), "{err}");
    assert!(!tmp.path().join("report").exists());
}

#[test]
fn invalid_tolerance_scale_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"weight": {"kind": "classical"}, "dim": 4}"#);
    let out = youngfock(&cfg, &["--tol-scale", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_config_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = youngfock(&tmp.path().join("absent.json"), &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"weight": {"kind": "classical"}, "dim": 4, "suite": "kernel"}"#,
    );
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out = youngfock(&cfg, &["--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn coalesced_nodes_fail_with_near_double_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"weight": {"kind": "classical"}, "dim": 3, "suite": "young",
            "points": {"kind": "list", "points": [[1, 0], [1.000000001, 0], [0, 1]]}}"#,
    );
    let out = youngfock(&cfg, &[]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&tmp.path().join("report"));
    let codes: Vec<&str> = r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|c| c["error"]["code"].as_str())
        .collect();
    assert!(codes.contains(&"NEAR_DOUBLE_ZERO"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NEAR_DOUBLE_ZERO"));
}

#[test]
fn repeated_runs_give_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"weight": {"kind": "power", "alpha": 3}, "dim": 5, "suite": "young", "seed": 11}"#,
    );
    let strip = |dir: &Path| {
        let mut r = report(dir);
        r["provenance"]["timestamp"] = Value::Null;
        serde_json::to_string(&r).unwrap()
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(
        youngfock(&cfg, &["--out", a.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        youngfock(&cfg, &["--out", b.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(
        fs::read(a.join("q_samples.csv")).unwrap(),
        fs::read(b.join("q_samples.csv")).unwrap()
    );
}

#[test]
fn empty_sweep_list_writes_no_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"weight": {"kind": "classical"}, "dim": 4, "sweeps": []}"#,
    );
    let out = youngfock(&cfg, &["--suite", "weights"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("report");
    let files: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(files, vec!["report.json"]);
    let r = report(&dir);
    assert!(r["notes"]
        .as_array()
        .unwrap()
        .contains(&Value::from("no sweeps")));
}

#[test]
fn sweep_csvs_carry_documented_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"weight": {"kind": "classical"}, "dim": 4, "suite": "weights"}"#,
    );
    assert_eq!(
        youngfock(&cfg, &["--suite", "weights"]).status.code(),
        Some(0)
    );
    let csv = fs::read_to_string(tmp.path().join("report/regularity.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# columns t,ratio:"));
    assert_eq!(lines.next().unwrap(), "t,ratio");
    assert_eq!(lines.count(), 60);
}

#[test]
fn flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"weight": {"kind": "classical"}, "dim": 4, "suite": "all"}"#,
    );
    let out_dir = tmp.path().join("out");
    let out = youngfock(
        &cfg,
        &[
            "--suite",
            "pw",
            "--seed",
            "9",
            "--tol-scale",
            "2",
            "--out",
            out_dir.to_str().unwrap(),
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let r = report(&out_dir);
    assert_eq!(r["config"]["suite"], "pw");
    assert_eq!(r["config"]["seed"], 9);
    assert_eq!(r["config"]["tolerances"]["scale"], 2.0);
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["name"].as_str().unwrap().starts_with("pw.")));
}

#[test]
fn unknown_suite_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"weight": {"kind": "classical"}, "dim": 4}"#);
    assert_eq!(
        youngfock(&cfg, &["--suite", "everything"]).status.code(),
        Some(2)
    );
}
