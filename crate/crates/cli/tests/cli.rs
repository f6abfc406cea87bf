use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const ABS: &str = r#"{"kind":"conformal","dim":2,"domain":{"min":[-2,-2],"max":[2,2]},"omega":"1 + abs(x1)"}"#;
const EUC: &str = r#"{"kind":"euclidean","dim":2,"domain":{"min":[-5,-5],"max":[5,5]}}"#;
const SEG: &str = r#"{"kind":"polyline","vertices":[[-1,0],[1,0]]}"#;
const DIAG: &str = r#"{"kind":"polyline","vertices":[[0,0],[3,4]]}"#;
const KINK: &str = r#"{"kind":"expr","components":["t","abs(2*t-1)-0.5"],"knots":[0.5]}"#;
const CANTOR: &str = r#"{"kind":"cantor-graph"}"#;

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        let w = Work { dir: TempDir::new().unwrap() };
        for (name, body) in [
            ("abs.json", ABS),
            ("euc.json", EUC),
            ("seg.json", SEG),
            ("diag.json", DIAG),
            ("kink.json", KINK),
            ("cantor.json", CANTOR),
            ("boxes.json", r#"[{"min":[-2,-2],"max":[2,2]}]"#),
        ] {
            fs::write(w.path(name), body).unwrap();
        }
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_lowreg")).current_dir(self.dir.path()).args(args).output().unwrap()
    }

    fn json(&self, args: &[&str]) -> Value {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        serde_json::from_slice(&out.stdout).unwrap()
    }

    fn text(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing {key} in {v}"))
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn euclidean_length_of_segment() {
    let w = Work::new();
    let v = w.json(&["length", "--metric", "euc.json", "--curve", "diag.json"]);
    assert!((num(&v, "value") - 5.0).abs() < 1e-12);
}

#[test]
fn csv_length_has_header_and_row() {
    let w = Work::new();
    let csv = w.text(&["length", "--metric", "abs.json", "--curve", "seg.json", "--format", "csv"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    let cols: Vec<&str> = lines[0].split(',').collect();
    let vals: Vec<&str> = lines[1].split(',').collect();
    let i = cols.iter().position(|c| *c == "value").unwrap();
    assert!((vals[i].parse::<f64>().unwrap() - 3.0).abs() < 1e-9);
}

#[test]
fn induced_length_csv_is_a_trace() {
    let w = Work::new();
    let csv = w.text(&["induced-length", "--metric", "euc.json", "--curve", "cantor.json", "--depth", "4", "--format", "csv"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("depth,chordCount,chordSum"));
    let sums: Vec<f64> = lines.map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(!sums.is_empty());
    assert!(sums.windows(2).all(|s| s[1] >= s[0] - 1e-12));
    assert!(*sums.last().unwrap() > 1.9);
}

#[test]
fn distance_across_the_kink() {
    let w = Work::new();
    let v = w.json(&["distance", "--metric", "abs.json", "--from=-1,0", "--to", "1,0"]);
    assert!((num(&v, "value") - 3.0).abs() < 5e-3);
    assert!(v.get("history").is_none());
    let v = w.json(&["distance", "--metric", "abs.json", "--from=-1,0", "--to", "1,0", "--history"]);
    assert!(v["history"].as_array().is_some_and(|h| !h.is_empty()));
}

#[test]
fn distance_outside_domain_fails() {
    let w = Work::new();
    let out = w.run(&["distance", "--metric", "abs.json", "--from", "3,0", "--to", "1,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside"));
}

#[test]
fn dac_of_identical_curves_is_zero() {
    let w = Work::new();
    let v = w.json(&["dac", "--metric", "abs.json", "--curve-a", "seg.json", "--curve-b", "seg.json"]);
    assert_eq!(num(&v, "value"), 0.0);
}

#[test]
fn metric_derivative_matches_speed() {
    let w = Work::new();
    let v = w.json(&["metric-derivative", "--metric", "abs.json", "--curve", "kink.json", "--t", "0.25"]);
    assert!((num(&v, "value") - num(&v, "analytic")).abs() < 1e-6);
    let out = w.run(&["metric-derivative", "--metric", "abs.json", "--curve", "kink.json", "--t", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mollified_spec_loads_back() {
    let w = Work::new();
    let out = w.run(&["mollify", "--metric", "abs.json", "--target-n", "5", "--grid", "16", "--out", "mol.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let spec: Value = serde_json::from_str(&read(&w.path("mol.json"))).unwrap();
    assert_eq!(spec["kind"], "sampled-grid");
    let v = w.json(&["length", "--metric", "mol.json", "--curve", "seg.json"]);
    let ratio = num(&v, "value") / 3.0;
    assert!((0.8..=1.2).contains(&ratio), "{ratio}");
    let csv = w.run(&["mollify", "--metric", "abs.json", "--target-n", "5", "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(2));
}

#[test]
fn approximation_stays_within_bound() {
    let w = Work::new();
    let v = w.json(&["approximate", "--metric", "abs.json", "--curve", "kink.json", "--eta", "0.1", "--boxes", "boxes.json"]);
    assert!(num(&v, "dacMeasured") <= num(&v, "dacBound") + 1e-6);
    assert_eq!(v["curve"]["kind"], "polyline");
    fs::write(w.path("approx.json"), v["curve"].to_string()).unwrap();
    let l = w.json(&["length", "--metric", "abs.json", "--curve", "approx.json"]);
    let l0 = w.json(&["length", "--metric", "abs.json", "--curve", "kink.json"]);
    assert!((num(&l, "value") - num(&l0, "value")).abs() <= num(&v, "dacMeasured") + 1e-6);
}

#[test]
fn equivalence_band_holds() {
    let w = Work::new();
    let v = w.json(&[
        "equivalence", "--metric-a", "abs.json", "--metric-b", "euc.json", "--pairs", "6", "--box-min=-1,-1", "--box-max",
        "1,1",
    ]);
    assert_eq!(v["pass"], true);
    assert!(num(&v, "cEmp") >= 1.0 - 1e-2 && num(&v, "CEmp") <= 2.0 + 1e-2);
}

#[test]
fn verify_and_report_round_trip() {
    let w = Work::new();
    let out = w.run(&["verify", "--suite", "snowflake-counterexample", "--out", "rep.json"]);
    assert!(out.status.success());
    let csv = w.text(&["report", "--input", "rep.json", "--format", "csv"]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("suite,case,observed,expected,tolerance,pass,millis"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains(",true,")));
}

#[test]
fn verify_is_deterministic_for_a_seed() {
    let w = Work::new();
    let a = w.text(&["verify", "--suite", "equivalence-constants", "--format", "csv", "--seed", "7"]);
    let b = w.text(&["verify", "--suite", "equivalence-constants", "--format", "csv", "--seed", "7"]);
    assert_eq!(a, b);
}

#[test]
fn failing_report_exits_nonzero() {
    let w = Work::new();
    let body = r#"{"suite":"x","config":null,"cases":[{"suite":"x","name":"c","observed":2.0,"expected":1.0,"tolerance":0.0,"kind":"within","pass":false}]}"#;
    fs::write(w.path("bad.json"), body).unwrap();
    let out = w.run(&["report", "--input", "bad.json", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains(",false,"));
}

#[test]
fn bad_inputs_exit_with_usage_errors() {
    let w = Work::new();
    assert_eq!(w.run(&["length", "--metric", "missing.json", "--curve", "seg.json"]).status.code(), Some(2));
    assert_eq!(w.run(&["verify", "--suite", "bogus"]).status.code(), Some(2));
    assert!(!w.run(&["length"]).status.success());
}
