//! Validation reports: labelled residual verdicts plus the sampling setup.

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::expr::{EvalError, Expr, Sampler, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub label: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

/// Outcome of a test that is not a zero test (regularity, flow diagnostics).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub label: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, f64>>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub check: String,
    pub seed: u64,
    pub trials: usize,
    pub tol: f64,
    pub entries: Vec<Entry>,
    pub checks: Vec<CheckEntry>,
}

impl ValidationReport {
    pub fn new(check: &str, sampler: &Sampler) -> Self {
        ValidationReport {
            check: check.to_string(),
            seed: sampler.seed,
            trials: sampler.trials,
            tol: sampler.tol,
            entries: Vec::new(),
            checks: Vec::new(),
        }
    }

    /// Tests every labelled residual against `sampler` in one batch.
    pub fn from_residuals(check: &str, sampler: &Sampler, residuals: Vec<(String, Expr)>) -> Result<Self, EvalError> {
        let mut r = ValidationReport::new(check, sampler);
        r.extend_residuals(sampler, residuals)?;
        Ok(r)
    }

    pub fn extend_residuals(&mut self, sampler: &Sampler, residuals: Vec<(String, Expr)>) -> Result<(), EvalError> {
        let (labels, exprs): (Vec<String>, Vec<Expr>) = residuals.into_iter().unzip();
        let verdicts = sampler.check_many(&exprs)?;
        for (label, verdict) in labels.into_iter().zip(verdicts) {
            self.entries.push(Entry { label, verdict });
        }
        Ok(())
    }

    pub fn push(&mut self, label: impl Into<String>, verdict: Verdict) {
        self.entries.push(Entry { label: label.into(), verdict });
    }

    pub fn push_check(&mut self, c: CheckEntry) {
        self.checks.push(c);
    }

    /// Appends another report's entries, prefixing their labels.
    pub fn absorb(&mut self, prefix: &str, other: ValidationReport) {
        for e in other.entries {
            self.entries.push(Entry { label: format!("{prefix}{}", e.label), verdict: e.verdict });
        }
        for mut c in other.checks {
            c.label = format!("{prefix}{}", c.label);
            self.checks.push(c);
        }
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.verdict.passed()) && self.checks.iter().all(|c| c.passed)
    }

    pub fn all_proven(&self) -> bool {
        self.entries.iter().all(|e| e.verdict.is_proven())
    }

    pub fn residual_max(&self) -> f64 {
        let zero_tests = self.entries.iter().map(|e| e.verdict.residual());
        zero_tests.chain(self.checks.iter().filter_map(|c| c.residual)).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter().filter(|e| !e.verdict.passed())
    }

    pub fn witness(&self) -> Option<&BTreeMap<String, f64>> {
        let from_entries = self.failures().find_map(|e| match &e.verdict {
            Verdict::NonZero { witness, .. } => Some(witness),
            _ => None,
        });
        from_entries.or_else(|| self.checks.iter().filter(|c| !c.passed).find_map(|c| c.witness.as_ref()))
    }

    pub fn status(&self) -> &'static str {
        if self.passed() {
            "pass"
        } else {
            "fail"
        }
    }
}

impl Serialize for ValidationReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("check", &self.check)?;
        m.serialize_entry("status", self.status())?;
        m.serialize_entry("residual_max", &self.residual_max())?;
        if let Some(w) = self.witness() {
            m.serialize_entry("witness", w)?;
        }
        m.serialize_entry("seed", &self.seed)?;
        m.serialize_entry("trials", &self.trials)?;
        m.serialize_entry("tol", &self.tol)?;
        m.serialize_entry("entries", &self.entries)?;
        if !self.checks.is_empty() {
            m.serialize_entry("checks", &self.checks)?;
        }
        m.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{SampleBox, Symbol};

    #[test]
    fn json_shape() {
        let x = Symbol::new("x1");
        let s = Sampler::new(SampleBox::uniform(std::slice::from_ref(&x), -1.0, 1.0).unwrap(), 8, 1e-9, 3);
        let xe = Expr::sym(&x);
        let r = ValidationReport::from_residuals(
            "demo",
            &s,
            vec![("a".into(), &xe - &xe), ("b".into(), xe.clone())],
        )
        .unwrap();
        assert!(!r.passed());
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["status"], "fail");
        assert_eq!(v["seed"], 3);
        assert!(v["witness"]["x1"].is_number());
        assert_eq!(v["entries"][0]["verdict"], "proven_zero");
        assert_eq!(v["entries"][1]["verdict"], "non_zero");
    }
}
