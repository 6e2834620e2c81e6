use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const OU: &str = r#"
[diffusion]
drift = "-x"
sigma = "sqrt(2)"

[window]
lo = -8.0
hi = 8.0

[simulation]
paths = 500
from = 1.0
to = 0.0
"#;

fn hitgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hitgap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_ou_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OU);
    let out = dir.path().join("out");
    let r = hitgap(&["analyze", s(&cfg), "-o", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report = read_json(&out.join("report.json"));
    assert!(report["violations"].as_array().unwrap().is_empty());
    let hash = report["manifest_hash"].as_str().unwrap().to_string();
    assert_eq!(hash.len(), 64);
    for f in ["report.csv", "b_curve.csv", "ratios.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().next().unwrap(), format!("# manifest_hash={hash}"));
    }
    assert_eq!(read_json(&out.join("manifest.json"))["manifest_hash"], hash.as_str());
}

#[test]
fn anchors_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OU);
    let out = dir.path().join("out");
    let r = hitgap(&["analyze", s(&cfg), "-o", s(&out), "--anchors", "-1,0,1"]);
    assert_eq!(r.status.code(), Some(0));
    let report = read_json(&out.join("report.json"));
    let a: Vec<f64> = report["anchors"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["a"].as_f64().unwrap())
        .collect();
    assert_eq!(a, vec![-1.0, 0.0, 1.0]);
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[diffusion\ndrift = ");
    let r = hitgap(&["analyze", s(&cfg), "-o", s(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("TOML parse error"));
    let missing = hitgap(&["analyze", s(&dir.path().join("nope.toml"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failing_report_exits_1() {
    // bracket tolerance below zero turns every inequality into a violation
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{OU}\n[tolerances]\nbracket_rel = -0.9\n"));
    let out = dir.path().join("out");
    let r = hitgap(&["analyze", s(&cfg), "-o", s(&out), "--grid-size", "500"]);
    assert_eq!(r.status.code(), Some(1));
    let stdout: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert!(!stdout["violations"].as_array().unwrap().is_empty());
}

#[test]
fn spectrum_killed_gap_and_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OU);
    let mut gaps = Vec::new();
    for n in ["1000", "4000"] {
        let out = dir.path().join(n);
        let r = hitgap(&["spectrum", s(&cfg), "--anchor", "0", "--side", "plus", "--grid-size", n, "-o", s(&out)]);
        assert_eq!(r.status.code(), Some(0));
        gaps.push(read_json(&out.join("spectrum.json"))["gap"].as_f64().unwrap());
    }
    assert!((gaps[1] - 1.0).abs() < 1e-3, "{gaps:?}");
    assert!((gaps[0] - gaps[1]).abs() / gaps[1] < 5e-3);
}

#[test]
fn spectrum_rejects_bad_bc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OU);
    assert_eq!(hitgap(&["spectrum", s(&cfg), "--bc", "robin"]).status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OU);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let r = hitgap(&["simulate", s(&cfg), "--seed", "7", "-o", s(out)]);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let bytes = |p: &Path| std::fs::read(p.join("samples.csv")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    let summary = read_json(&a.join("summary.json"));
    let tail = &summary["tail_rate"];
    assert!(tail["rate"].as_f64().unwrap() > 0.0);
    assert!(tail["fit_start"].as_f64().unwrap() < tail["fit_end"].as_f64().unwrap());
}

#[test]
fn simulate_target_outside_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OU);
    let r = hitgap(&["simulate", s(&cfg), "--to", "20", "-o", s(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn invalid_thread_cap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OU);
    let r = Command::new(env!("CARGO_BIN_EXE_hitgap"))
        .args(["spectrum", s(&cfg), "-o", s(&dir.path().join("o"))])
        .env("HITGAP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn sandwich_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let r = hitgap(&["sandwich-check", "-o", s(dir.path())]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stdout));
    assert_eq!(read_json(&dir.path().join("sandwich.json"))["passed"], true);
}

#[test]
fn json_floats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), OU);
    let out = dir.path().join("out");
    hitgap(&["analyze", s(&cfg), "-o", s(&out), "--anchors", "0"]);
    let text = std::fs::read_to_string(out.join("report.json")).unwrap();
    let report: hitgap::constants::ConstantsReport = serde_json::from_str(&text).unwrap();
    let again = serde_json::to_string_pretty(&report).unwrap();
    let back: hitgap::constants::ConstantsReport = serde_json::from_str(&again).unwrap();
    assert_eq!(report, back);
}
