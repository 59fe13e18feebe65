//! Structured pass/fail results shared by every checking operation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// One named constraint family evaluated over a set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Smallest slack observed (negative means violated).
    pub worst_slack: f64,
    /// Where the worst slack occurs, when the check is indexed by a point.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub worst_at: Option<f64>,
    /// Points whose slack is within tolerance of zero.
    #[serde(default)]
    pub binding: Vec<f64>,
    /// `(point, slack)` pairs; dropped from JSON unless verbose.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub slacks: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl CheckResult {
    /// Builds a check from per-point slacks: passes iff every slack is at
    /// least `-tol`; a point is binding when `|slack| <= tol`.
    pub fn from_slacks(name: impl Into<String>, slacks: Vec<(f64, f64)>, tol: f64) -> Self {
        let mut worst = f64::INFINITY;
        let mut worst_at = None;
        for &(at, s) in &slacks {
            if s < worst || s.is_nan() {
                worst = s;
                worst_at = Some(at);
            }
        }
        let binding = slacks
            .iter()
            .filter(|(_, s)| s.abs() <= tol)
            .map(|&(at, _)| at)
            .collect();
        Self {
            name: name.into(),
            passed: worst >= -tol,
            worst_slack: worst,
            worst_at,
            binding,
            slacks,
            note: None,
        }
    }

    /// A single scalar condition `slack >= -tol`.
    pub fn scalar(name: impl Into<String>, slack: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            passed: slack >= -tol,
            worst_slack: slack,
            worst_at: None,
            binding: Vec::new(),
            slacks: Vec::new(),
            note: None,
        }
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        Self::scalar(name, if passed { 0.0 } else { -1.0 }, 0.0)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn slack_at(&self, at: f64) -> Option<f64> {
        self.slacks
            .iter()
            .find(|(p, _)| (p - at).abs() <= 1e-12)
            .map(|&(_, s)| s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub status: Status,
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl VerificationReport {
    pub fn new(name: impl Into<String>, checks: Vec<CheckResult>) -> Self {
        let status = if checks.iter().all(|c| c.passed) {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name: name.into(),
            status,
            checks,
            warnings: Vec::new(),
        }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Skipped,
            checks: Vec::new(),
            warnings: vec![reason.into()],
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Smallest slack across all checks.
    pub fn worst_slack(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.worst_slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn failing(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// JSON rendering; per-point slack arrays only when `verbose`.
    pub fn to_json(&self, verbose: bool) -> serde_json::Value {
        let mut report = self.clone();
        if !verbose {
            for c in &mut report.checks {
                c.slacks.clear();
            }
        }
        serde_json::to_value(report).expect("report serialises")
    }

    /// Human-readable multi-line summary.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{}: {}\n",
            self.name,
            match self.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIPPED",
            }
        );
        for c in &self.checks {
            out.push_str(&format!(
                "  [{}] {:<32} worst slack {:+.6e}",
                if c.passed { "ok" } else { "!!" },
                c.name,
                c.worst_slack
            ));
            if let Some(at) = c.worst_at {
                out.push_str(&format!(" at {at:.6}"));
            }
            if let Some(note) = &c.note {
                out.push_str(&format!("  ({note})"));
            }
            out.push('\n');
        }
        for w in &self.warnings {
            out.push_str(&format!("  warning: {w}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_bookkeeping() {
        let c = CheckResult::from_slacks("c", vec![(1.0, 0.5), (1.5, -1e-12), (2.0, -0.2)], 1e-9);
        assert!(!c.passed);
        assert_eq!(c.worst_at, Some(2.0));
        assert_eq!(c.binding, vec![1.5]);
        let r = VerificationReport::new("r", vec![c]);
        assert_eq!(r.status, Status::Fail);
        let json = r.to_json(false);
        assert!(json["checks"][0].get("slacks").is_none());
        assert!(r.to_json(true)["checks"][0]["slacks"].is_array());
    }
}
