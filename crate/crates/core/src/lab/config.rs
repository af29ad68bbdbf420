use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::LabError;
use crate::dde::{DelaySpec, NonlinearitySpec, Profile};
use crate::relaxation::{FracParams, TimeGrid};
use crate::spectral::{Domain, EigenBasis, Field};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Dissipativity,
    AsymptoticStability,
    DecayFamily,
    HalanaySuite,
    RelaxationSuite,
}

/// One experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seed for random initial data.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub domain: DomainSection,
    #[serde(default)]
    pub delay: DelaySection,
    #[serde(default)]
    pub nonlin: NonlinSection,
    #[serde(default)]
    pub grid: GridSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// Initial sizes as multiples of the absorbing radius.
    #[serde(default = "default_scales")]
    pub scales: Vec<f64>,
    /// Proportional-delay factors swept by the stability run.
    #[serde(default = "default_q_values")]
    pub q_values: Vec<f64>,
    /// `‖ξ‖∞` for the stability run.
    #[serde(default = "default_xi_norm")]
    pub xi_norm: f64,
    /// Relative decay target at the horizon.
    #[serde(default = "default_decay_tol")]
    pub decay_tol: f64,
    /// Allowance over the limiting level on the tail window `[T/2, T]`.
    #[serde(default = "default_tail_slack")]
    pub tail_slack: f64,
    #[serde(default = "default_family_size")]
    pub family_size: usize,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_mus")]
    pub mus: Vec<f64>,
    /// Cross-method comparison times for the relaxation suite.
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// Horizon of the relaxation suite.
    #[serde(default = "default_suite_horizon")]
    pub suite_horizon: f64,
    #[serde(default = "default_halanay_cases")]
    pub halanay: Vec<HalanayCase>,
    /// Steps per Halanay instance on `[0, 200/μ]`.
    #[serde(default = "default_halanay_steps")]
    pub halanay_steps: usize,
    /// Write `c_1..c_N` into trajectory CSVs.
    #[serde(default = "default_true")]
    pub write_coefficients: bool,
}

fn default_scales() -> Vec<f64> {
    vec![0.1, 1.0, 10.0, 100.0]
}
fn default_q_values() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}
fn default_xi_norm() -> f64 {
    0.1
}
fn default_decay_tol() -> f64 {
    1e-3
}
fn default_tail_slack() -> f64 {
    0.05
}
fn default_family_size() -> usize {
    16
}
fn default_alphas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn default_gammas() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}
fn default_mus() -> Vec<f64> {
    vec![1.0, 5.0, 25.0]
}
fn default_times() -> Vec<f64> {
    vec![0.01, 0.1, 1.0, 10.0]
}
fn default_suite_horizon() -> f64 {
    10.0
}
fn default_halanay_steps() -> usize {
    10_000
}
fn default_true() -> bool {
    true
}

/// Forcing term `b` of a Halanay instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    Zero,
    Constant { value: f64 },
    /// `value·min(t/ramp_time, 1)`.
    Ramp { value: f64, ramp_time: f64 },
}

impl ForcingSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::Constant { value } => value,
            ForcingSpec::Ramp { value, ramp_time } => value * (t / ramp_time).min(1.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ForcingSpec::Zero)
    }
}

/// One extremal instance: `ψ ≡ psi` on `[−τ, 0]`, horizon `200/μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalanayCase {
    pub mu: f64,
    pub a: f64,
    pub b: ForcingSpec,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Proportional delay `qt − τ` instead of `t − τ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default = "default_psi")]
    pub psi: f64,
}

fn default_tau() -> f64 {
    1.0
}
fn default_psi() -> f64 {
    1.0
}

fn default_halanay_cases() -> Vec<HalanayCase> {
    let bs = [
        ForcingSpec::Zero,
        ForcingSpec::Constant { value: 0.5 },
        ForcingSpec::Ramp { value: 0.5, ramp_time: 10.0 },
    ];
    let mut cases = Vec::new();
    for (mu, a) in [(2.0, 1.0), (1.0, 0.9), (5.0, 0.5)] {
        for b in bs {
            cases.push(HalanayCase { mu, a, b, tau: 1.0, q: None, psi: 1.0 });
        }
    }
    cases.push(HalanayCase {
        mu: 2.0,
        a: 1.0,
        b: ForcingSpec::Constant { value: 0.5 },
        tau: 1.0,
        q: Some(0.5),
        psi: 1.0,
    });
    cases
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { alpha: 0.5, gamma: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Rectangle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKind,
    /// Interval length (default `π`).
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(rename = "Lx", default, skip_serializing_if = "Option::is_none")]
    pub lx: Option<f64>,
    #[serde(rename = "Ly", default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
    /// Number of modes.
    #[serde(rename = "N")]
    pub n: usize,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { kind: DomainKind::Interval, l: None, lx: None, ly: None, n: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    Constant,
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySection {
    pub kind: DelayKind,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_q() -> f64 {
    1.0
}

impl Default for DelaySection {
    fn default() -> Self {
        Self { kind: DelayKind::Constant, q: 1.0, tau: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinKind {
    Zero,
    /// `f(t, v) = p0·w`, `w` a fixed unit vector.
    Forcing,
    /// `f(t, v) = c·v`.
    Linear,
    /// `f(t, v) = p(t)‖v‖v` with `p(t) = p0·e^{−rate·t}`.
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinSection {
    pub kind: NonlinKind,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Default for NonlinSection {
    fn default() -> Self {
        Self { kind: NonlinKind::Zero, params: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grading {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub h: f64,
    /// Horizon; defaults to `200/λ₁`.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default = "default_grading")]
    pub grading: Grading,
}

fn default_grading() -> Grading {
    Grading::Uniform
}

impl Default for GridSection {
    fn default() -> Self {
        Self { h: 0.01, t: None, grading: Grading::Uniform }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, LabError> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, LabError> {
        toml::to_string(self).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<FracParams, LabError> {
        Ok(FracParams::new(self.model.alpha, self.model.gamma)?)
    }

    pub fn domain(&self) -> Result<Domain, LabError> {
        let d = &self.domain;
        let domain = match d.kind {
            DomainKind::Interval => Domain::Interval { length: d.l.unwrap_or(PI) },
            DomainKind::Rectangle => Domain::Rectangle {
                lx: d.lx.or(d.l).unwrap_or(PI),
                ly: d.ly.or(d.l).unwrap_or(PI),
            },
        };
        domain.validate()?;
        Ok(domain)
    }

    pub fn basis(&self) -> Result<Arc<EigenBasis>, LabError> {
        Ok(Arc::new(EigenBasis::new(self.domain()?, self.domain.n)?))
    }

    /// Uniform grid with step `grid.h` on `[0, T]`, `T` rounded up to a whole step.
    pub fn time_grid(&self, lambda1: f64) -> Result<TimeGrid, LabError> {
        let t_end = self.grid.t.unwrap_or(200.0 / lambda1);
        let h = self.grid.h;
        if !(h > 0.0) || !(t_end > 0.0) {
            return Err(LabError::Config(format!("need h > 0 and T > 0, got h = {h}, T = {t_end}")));
        }
        let steps = (t_end / h - 1e-9).ceil().max(1.0) as usize;
        Ok(TimeGrid::uniform(steps as f64 * h, steps)?)
    }

    pub fn delay_spec(&self) -> DelaySpec {
        match self.delay.kind {
            DelayKind::Constant => DelaySpec::Constant { tau: self.delay.tau },
            DelayKind::Proportional => DelaySpec::Proportional { q: self.delay.q, tau: self.delay.tau },
        }
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.nonlin.params.get(key).copied().unwrap_or(default)
    }

    pub fn nonlinearity(&self, basis: &Arc<EigenBasis>) -> Result<NonlinearitySpec, LabError> {
        let known: &[&str] = match self.nonlin.kind {
            NonlinKind::Zero => &[],
            NonlinKind::Forcing => &["p0"],
            NonlinKind::Linear => &["c"],
            NonlinKind::Quadratic => &["p0", "rate"],
        };
        if let Some(k) = self.nonlin.params.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(LabError::Config(format!("unknown parameter {k:?} for {:?}", self.nonlin.kind)));
        }
        Ok(match self.nonlin.kind {
            NonlinKind::Zero => NonlinearitySpec::zero(),
            NonlinKind::Forcing => NonlinearitySpec::forcing(self.param("p0", 0.5), &smooth_direction(basis)),
            NonlinKind::Linear => NonlinearitySpec::linear(self.param("c", 0.5)),
            NonlinKind::Quadratic => {
                let (p0, rate) = (self.param("p0", 1.0), self.param("rate", 1.0));
                let p = if rate == 0.0 {
                    Profile::Constant { value: p0 }
                } else {
                    Profile::Exponential { amplitude: p0, rate }
                };
                NonlinearitySpec::quadratic(p)
            }
        })
    }
}

/// Unit vector with coefficients `∝ n⁻²`.
pub fn smooth_direction(basis: &Arc<EigenBasis>) -> Field {
    let c: Vec<f64> = (1..=basis.len()).map(|n| 1.0 / (n * n) as f64).collect();
    let f = Field::new(basis.clone(), c).expect("basis length");
    let norm = f.norm();
    f.scaled(1.0 / norm)
}
