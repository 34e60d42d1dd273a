//! Check outcomes and their JSON/CSV forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::format::sig17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Passed,
    Failed,
    /// The check's premise does not hold on the data, so it says nothing.
    Inapplicable,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Passed => "passed",
            CheckStatus::Failed => "failed",
            CheckStatus::Inapplicable => "inapplicable",
        }
    }
}

/// One verified inequality. `passed ⇔ worst_ratio ≤ 1 + tolerance`; an
/// inapplicable check has no ratio (`NaN`, serialized as `null`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub status: CheckStatus,
    pub worst_ratio: f64,
    pub witness: String,
    pub tolerance: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckResult {
    pub fn from_ratio(
        name: impl Into<String>,
        worst_ratio: f64,
        witness: impl Into<String>,
        tolerance: f64,
    ) -> Self {
        let passed = worst_ratio <= 1.0 + tolerance;
        Self {
            name: name.into(),
            passed,
            status: if passed {
                CheckStatus::Passed
            } else {
                CheckStatus::Failed
            },
            worst_ratio,
            witness: witness.into(),
            tolerance,
            notes: Vec::new(),
        }
    }

    pub fn inapplicable(
        name: impl Into<String>,
        reason: impl Into<String>,
        tolerance: f64,
    ) -> Self {
        Self {
            name: name.into(),
            passed: false,
            status: CheckStatus::Inapplicable,
            worst_ratio: f64::NAN,
            witness: String::new(),
            tolerance,
            notes: vec![reason.into()],
        }
    }

    pub fn with_notes(mut self, notes: Vec<String>) -> Self {
        self.notes.extend(notes);
        self
    }

    /// `true` unless the check failed.
    pub fn acceptable(&self) -> bool {
        self.status != CheckStatus::Failed
    }
}

/// Tracks the largest ratio seen and where it occurred. Ties keep the
/// earliest candidate so results do not depend on evaluation order.
#[derive(Debug, Clone)]
pub(crate) struct Worst {
    pub ratio: f64,
    pub witness: String,
}

impl Worst {
    pub fn new() -> Self {
        Self {
            ratio: f64::NEG_INFINITY,
            witness: String::new(),
        }
    }

    pub fn offer(&mut self, ratio: f64, witness: impl FnOnce() -> String) {
        if ratio > self.ratio || (ratio.is_nan() && !self.ratio.is_nan()) {
            self.ratio = ratio;
            self.witness = witness();
        }
    }

    pub fn merge(&mut self, other: Worst) {
        if other.ratio > self.ratio || (other.ratio.is_nan() && !self.ratio.is_nan()) {
            *self = other;
        }
    }
}

/// All checks of one run, plus what they were run against.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub backend: Value,
    pub c_p: f64,
    pub checks: Vec<CheckResult>,
    pub timestamp: Option<String>,
}

impl VerificationReport {
    /// Sorts checks by name; the report needs at least one check.
    pub fn new(backend: Value, c_p: f64, mut checks: Vec<CheckResult>) -> Result<Self> {
        if checks.is_empty() {
            return Err(Error::Precondition(
                "a report needs at least one check".into(),
            ));
        }
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(Self {
            backend,
            c_p,
            checks,
            timestamp: None,
        })
    }

    pub fn with_timestamp(mut self, timestamp: impl Into<String>) -> Self {
        self.timestamp = Some(timestamp.into());
        self
    }

    /// No check failed (inapplicable checks are tolerated).
    pub fn all_acceptable(&self) -> bool {
        self.checks.iter().all(CheckResult::acceptable)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.acceptable())
    }

    pub fn to_value(&self) -> Value {
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| serde_json::to_value(c).expect("check serializes"))
            .collect();
        let mut v = json!({
            "backend": self.backend,
            "C_P": self.c_p,
            "checks": checks,
        });
        if let Some(ts) = &self.timestamp {
            v["timestamp"] = Value::String(ts.clone());
        }
        v
    }

    /// Pretty JSON with sorted keys.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("report serializes");
        s.push('\n');
        s
    }

    /// CSV with columns `name,status,passed,worst_ratio,witness,tolerance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,status,passed,worst_ratio,witness,tolerance\n");
        for c in &self.checks {
            let ratio = if c.worst_ratio.is_nan() {
                String::new()
            } else {
                sig17(c.worst_ratio)
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&c.name),
                c.status.as_str(),
                c.passed,
                ratio,
                csv_field(&c.witness),
                sig17(c.tolerance)
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
