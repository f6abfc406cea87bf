//! Verification reports and their CSV/JSON forms.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// How `observed` is compared against `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseKind {
    /// |observed − expected| ≤ tolerance.
    Within,
    /// observed ≤ expected + tolerance.
    AtMost,
    /// observed ≥ expected − tolerance.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationCase {
    pub suite: String,
    pub name: String,
    /// `None` when the case could not be evaluated.
    pub observed: Option<f64>,
    pub expected: f64,
    pub tolerance: f64,
    pub kind: CaseKind,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub millis: Option<u64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl VerificationCase {
    pub fn new(suite: &str, name: &str, observed: f64, expected: f64, tolerance: f64, kind: CaseKind) -> Self {
        let pass = observed.is_finite()
            && match kind {
                CaseKind::Within => (observed - expected).abs() <= tolerance,
                CaseKind::AtMost => observed <= expected + tolerance,
                CaseKind::AtLeast => observed >= expected - tolerance,
            };
        VerificationCase {
            suite: suite.to_string(),
            name: name.to_string(),
            observed: Some(observed),
            expected,
            tolerance,
            kind,
            pass,
            millis: None,
            detail: String::new(),
        }
    }

    pub fn within(suite: &str, name: &str, observed: f64, expected: f64, tolerance: f64) -> Self {
        Self::new(suite, name, observed, expected, tolerance, CaseKind::Within)
    }

    pub fn at_most(suite: &str, name: &str, observed: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(suite, name, observed, bound, tolerance, CaseKind::AtMost)
    }

    pub fn at_least(suite: &str, name: &str, observed: f64, bound: f64, tolerance: f64) -> Self {
        Self::new(suite, name, observed, bound, tolerance, CaseKind::AtLeast)
    }

    /// A boolean check recorded as observed 1/0 against expected 1.
    pub fn flag(suite: &str, name: &str, ok: bool) -> Self {
        Self::within(suite, name, if ok { 1.0 } else { 0.0 }, 1.0, 0.0)
    }

    /// A case whose computation failed.
    pub fn failed(suite: &str, name: &str, expected: f64, tolerance: f64, kind: CaseKind, err: &str) -> Self {
        VerificationCase {
            suite: suite.to_string(),
            name: name.to_string(),
            observed: None,
            expected,
            tolerance,
            kind,
            pass: false,
            millis: None,
            detail: err.to_string(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub suite: String,
    pub cases: Vec<VerificationCase>,
    /// Snapshot of the configuration the suite ran with.
    pub config: serde_json::Value,
}

pub const CSV_HEADER: &str = "suite,case,observed,expected,tolerance,pass,millis";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl VerificationReport {
    pub fn new(suite: &str, config: serde_json::Value) -> Self {
        VerificationReport { suite: suite.to_string(), cases: Vec::new(), config }
    }

    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &VerificationCase> {
        self.cases.iter().filter(|c| !c.pass)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cases {
            let observed = c.observed.map(|v| format!("{v:e}")).unwrap_or_default();
            let millis = c.millis.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{:e},{:e},{},{}",
                csv_field(&c.suite),
                csv_field(&c.name),
                observed,
                c.expected,
                c.tolerance,
                c.pass,
                millis
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(src: &str) -> Result<Self> {
        Ok(serde_json::from_str(src)?)
    }

    /// Writes the report to `path` in the requested format.
    pub fn emit(&self, csv: bool, path: &Path) -> Result<()> {
        let body = if csv { self.to_csv() } else { self.to_json()? + "\n" };
        std::fs::write(path, body)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        let r = VerificationReport::new("none", serde_json::Value::Null);
        assert_eq!(r.to_csv(), format!("{CSV_HEADER}\n"));
        assert!(r.passed());
    }

    #[test]
    fn one_passing_row() {
        let mut r = VerificationReport::new("s", serde_json::Value::Null);
        r.cases.push(VerificationCase::within("s", "c", 1.0, 1.0, 0.0));
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "s,c,1e0,1e0,0e0,true,");
    }

    #[test]
    fn case_kinds() {
        assert!(VerificationCase::at_most("s", "c", 1.1, 1.0, 0.1).pass);
        assert!(!VerificationCase::at_most("s", "c", 1.2, 1.0, 0.1).pass);
        assert!(VerificationCase::at_least("s", "c", 0.95, 1.0, 0.1).pass);
        assert!(!VerificationCase::within("s", "c", f64::NAN, 1.0, 1.0).pass);
        assert!(!VerificationCase::flag("s", "c", false).pass);
    }

    #[test]
    fn json_round_trip() {
        let mut r = VerificationReport::new("s", serde_json::json!({"seed": 42}));
        r.cases.push(VerificationCase::within("s", "a,b", 0.1 + 0.2, 0.3, 1e-12).with_detail("x"));
        r.cases.push(VerificationCase::failed("s", "b", 1.0, 0.0, CaseKind::AtMost, "boom"));
        let back = VerificationReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_csv().contains("\"a,b\""));
    }

    #[test]
    fn emit_writes_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = VerificationReport::new("s", serde_json::Value::Null);
        r.cases.push(VerificationCase::at_most("s", "c", 0.5, 1.0, 0.0));
        let csv = dir.path().join("r.csv");
        let json = dir.path().join("r.json");
        r.emit(true, &csv).unwrap();
        r.emit(false, &json).unwrap();
        assert_eq!(std::fs::read_to_string(&csv).unwrap(), r.to_csv());
        let back = VerificationReport::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
