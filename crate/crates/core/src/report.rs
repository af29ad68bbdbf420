//! A uniform record of "claimed bound vs. measured quantity".

use std::fmt;

use serde::{Deserialize, Serialize};

/// A scalar or a node-wise series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Scalar(f64),
    Series(Vec<f64>),
}

impl Quantity {
    fn values(&self) -> &[f64] {
        match self {
            Quantity::Scalar(v) => std::slice::from_ref(v),
            Quantity::Series(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub claimed: Quantity,
    pub measured: Quantity,
    /// `min(claimed − measured)` over the series.
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BoundReport {
    /// Node-wise comparison; `claimed` and `measured` must have equal length.
    pub fn series(
        name: impl Into<String>,
        claimed: Vec<f64>,
        measured: Vec<f64>,
        tolerance: f64,
    ) -> Self {
        assert_eq!(claimed.len(), measured.len(), "claimed/measured length mismatch");
        let margin = claimed
            .iter()
            .zip(&measured)
            .map(|(c, m)| c - m)
            .fold(f64::INFINITY, f64::min);
        Self::finish(name, Quantity::Series(claimed), Quantity::Series(measured), margin, tolerance)
    }

    pub fn scalar(name: impl Into<String>, claimed: f64, measured: f64, tolerance: f64) -> Self {
        Self::finish(
            name,
            Quantity::Scalar(claimed),
            Quantity::Scalar(measured),
            claimed - measured,
            tolerance,
        )
    }

    /// A bound that is vacuous for the given input. Counts as passing.
    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            claimed: Quantity::Series(Vec::new()),
            measured: Quantity::Series(Vec::new()),
            margin: 0.0,
            tolerance: 0.0,
            pass: true,
            skipped: true,
            note: Some(reason.into()),
        }
    }

    fn finish(
        name: impl Into<String>,
        claimed: Quantity,
        measured: Quantity,
        margin: f64,
        tolerance: f64,
    ) -> Self {
        // an empty series compares nothing
        let margin = if margin == f64::INFINITY { 0.0 } else { margin };
        Self {
            name: name.into(),
            claimed,
            measured,
            margin,
            tolerance,
            pass: margin >= -tolerance,
            skipped: false,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Largest measured value (useful for norm series).
    pub fn measured_max(&self) -> f64 {
        self.measured.values().iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn claimed_values(&self) -> &[f64] {
        self.claimed.values()
    }

    pub fn measured_values(&self) -> &[f64] {
        self.measured.values()
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.skipped, self.pass) {
            (true, _) => "SKIP",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        };
        write!(f, "[{status}] {}: margin {:.3e} (tol {:.1e})", self.name, self.margin, self.tolerance)?;
        if let Some(note) = &self.note {
            write!(f, "; {note}")?;
        }
        Ok(())
    }
}

/// `true` iff every report passes.
pub fn all_pass<'a>(reports: impl IntoIterator<Item = &'a BoundReport>) -> bool {
    reports.into_iter().all(|r| r.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margin_is_min_gap() {
        let r = BoundReport::series("x", vec![1.0, 2.0, 3.0], vec![0.5, 2.1, 1.0], 0.05);
        assert!((r.margin + 0.1).abs() < 1e-15);
        assert!(!r.pass);
        let r = BoundReport::series("x", vec![1.0, 2.0], vec![0.5, 2.01], 0.05);
        assert!(r.pass);
    }

    #[test]
    fn pass_iff_margin_within_tolerance() {
        for (c, m, tol) in [(1.0, 1.0, 0.0), (1.0, 1.1, 0.05), (1.0, 1.04, 0.05)] {
            let r = BoundReport::scalar("s", c, m, tol);
            assert_eq!(r.pass, r.margin >= -r.tolerance);
        }
    }

    #[test]
    fn json_roundtrip() {
        let r = BoundReport::series("x", vec![1.0], vec![0.0], 0.0).with_note("n");
        let back: BoundReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(r, back);
    }
}
