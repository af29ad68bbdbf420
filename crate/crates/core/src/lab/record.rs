use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, ExperimentKind, LabError};
use crate::report::{all_pass, BoundReport};

/// Norm history of one trajectory, thinned to at most [`SERIES_POINTS`] samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub label: String,
    pub t: Vec<f64>,
    pub norm: Vec<f64>,
}

pub const SERIES_POINTS: usize = 1001;

impl NormSeries {
    pub fn thinned(label: impl Into<String>, t: &[f64], norm: &[f64]) -> Self {
        let stride = t.len().div_ceil(SERIES_POINTS).max(1);
        let mut idx: Vec<usize> = (0..t.len()).step_by(stride).collect();
        if idx.last() != Some(&(t.len() - 1)) {
            idx.push(t.len() - 1);
        }
        Self {
            label: label.into(),
            t: idx.iter().map(|&i| t[i]).collect(),
            norm: idx.iter().map(|&i| norm[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Summary of one run; `verdict` is pass iff every report passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub reports: Vec<BoundReport>,
    /// Named scalars (radii, constants, entry times).
    pub values: BTreeMap<String, f64>,
    /// Named `(x, y)` tables.
    pub tables: BTreeMap<String, Vec<(f64, f64)>>,
    pub series: Vec<NormSeries>,
    pub verdict: Verdict,
    /// Files written next to `runrecord.json`, by name.
    #[serde(skip)]
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl RunRecord {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            kind: config.experiment.kind,
            seed: config.seed,
            config: config.clone(),
            reports: Vec::new(),
            values: BTreeMap::new(),
            tables: BTreeMap::new(),
            series: Vec::new(),
            verdict: Verdict::Pass,
            artifacts: Vec::new(),
        }
    }

    pub fn push(&mut self, report: BoundReport) {
        self.reports.push(report);
    }

    pub fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    pub fn finish(mut self) -> Self {
        self.verdict = if all_pass(&self.reports) { Verdict::Pass } else { Verdict::Fail };
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn to_json(&self) -> Result<String, LabError> {
        serde_json::to_string_pretty(self).map_err(|e| LabError::Config(e.to_string()))
    }

    /// Writes `runrecord.json` and every artifact into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), LabError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("runrecord.json"), self.to_json()?)?;
        for (name, bytes) in &self.artifacts {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    /// One line per report.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.reports {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s.push_str(&format!("verdict: {:?}\n", self.verdict).to_lowercase());
        s
    }
}
