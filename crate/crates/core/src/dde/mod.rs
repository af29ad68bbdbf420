//! Mild solutions of the delayed problem
//!
//! ```text
//! u(t) = S(t)ξ(0) + ∫₀ᵗ S(t − s) f(s, u(s − ρ(s))) ds,   u = ξ on [−τ, 0],
//! ```
//!
//! marched node by node in coefficient space with the product-integration weights of the
//! resolvent table.

mod integrate;
mod nonlinearity;
mod smallness;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relaxation::{FracParams, RelaxationError, TimeGrid};
use crate::spectral::{EigenBasis, Field, FieldSeries, SpectralError};

pub use integrate::{
    apriori_bound_f2, integrate, integrate_global, norm_chain_check, residual_check,
    uniqueness_probe, GlobalOptions, MildTrajectory,
};
pub use nonlinearity::{Envelope, Growth, NonlinearitySpec, Profile};
pub(crate) use smallness::default_slack;
pub use smallness::{omega_conv_p, smallness_radius, SmallnessOptions, SmallnessRadius};

#[derive(Debug, Error)]
pub enum DdeError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("Picard iteration stalled at node {node} (t = {t}): last increment {increment:.3e}, contraction ≈ {contraction:.3}")]
    PicardNonConvergent { node: usize, t: f64, increment: f64, contraction: f64 },
    #[error("delayed time {delayed} at t = {t} leaves [-tau, t] (tau = {tau})")]
    DelayOutOfRange { t: f64, delayed: f64, tau: f64 },
    #[error("missing metadata: {0}")]
    MissingMetadata(String),
    #[error("hypothesis fails: {0}")]
    HypothesisFails(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
}

/// The delay map, given through the delayed time `t − ρ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelaySpec {
    /// `ρ ≡ τ`.
    Constant { tau: f64 },
    /// `t − ρ(t) = q·t − τ`.
    Proportional { q: f64, tau: f64 },
    /// `ρ` sampled at `times`, linear in between and constant past the ends.
    Custom { tau: f64, times: Vec<f64>, rho: Vec<f64> },
}

impl DelaySpec {
    pub fn tau(&self) -> f64 {
        match *self {
            DelaySpec::Constant { tau } | DelaySpec::Proportional { tau, .. } | DelaySpec::Custom { tau, .. } => tau,
        }
    }

    pub fn validate(&self) -> Result<(), DdeError> {
        let bad = |m: String| Err(DdeError::InvalidProblem(m));
        if !(self.tau() >= 0.0) || !self.tau().is_finite() {
            return bad(format!("tau must be finite and >= 0, got {}", self.tau()));
        }
        match self {
            DelaySpec::Proportional { q, .. } if !(*q > 0.0 && *q <= 1.0) => {
                bad(format!("proportional delay needs q in (0, 1], got {q}"))
            }
            DelaySpec::Custom { times, rho, .. }
                if times.is_empty()
                    || times.len() != rho.len()
                    || times.windows(2).any(|w| !(w[1] > w[0])) =>
            {
                bad("custom delay needs matching, strictly increasing samples".into())
            }
            _ => Ok(()),
        }
    }

    /// `t − ρ(t)`.
    pub fn delayed_time(&self, t: f64) -> f64 {
        match self {
            DelaySpec::Constant { tau } => t - tau,
            DelaySpec::Proportional { q, tau } => q * t - tau,
            DelaySpec::Custom { times, rho, .. } => t - interp(times, rho, t),
        }
    }

    /// Whether `t − ρ(t)` is nondecreasing along `times`; reported, not required.
    pub fn is_monotone_on(&self, times: &[f64]) -> bool {
        times.windows(2).all(|w| self.delayed_time(w[1]) >= self.delayed_time(w[0]))
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let j = xs.partition_point(|&v| v <= x) - 1;
    let th = (x - xs[j]) / (xs[j + 1] - xs[j]);
    ys[j] + th * (ys[j + 1] - ys[j])
}

/// The initial datum `ξ` on `[−τ, 0]`, linear in time between its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    times: Vec<f64>,
    values: FieldSeries,
}

impl History {
    /// `times` ascending and ending at 0; one field per time.
    pub fn new(times: Vec<f64>, values: FieldSeries) -> Result<Self, DdeError> {
        if times.is_empty() || times.len() != values.len() {
            return Err(DdeError::InvalidProblem("history needs one field per time node".into()));
        }
        if *times.last().unwrap() != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DdeError::InvalidProblem(
                "history times must be strictly increasing and end at 0".into(),
            ));
        }
        Ok(Self { times, values })
    }

    /// `ξ(s) = ξ₀` on `[−τ, 0]`.
    pub fn constant(xi: &Field, tau: f64) -> Self {
        let basis = xi.basis().clone();
        let times = if tau > 0.0 { vec![-tau, 0.0] } else { vec![0.0] };
        let mut values = FieldSeries::zeros(basis, times.len());
        for i in 0..times.len() {
            values.node_mut(i).copy_from_slice(xi.coeffs());
        }
        Self { times, values }
    }

    /// `ξ` sampled at `nodes + 1` equispaced times on `[−τ, 0]`.
    pub fn from_fn(
        basis: Arc<EigenBasis>,
        tau: f64,
        nodes: usize,
        xi: impl Fn(f64) -> Field,
    ) -> Result<Self, DdeError> {
        let times: Vec<f64> = if tau > 0.0 {
            let n = nodes.max(1);
            (0..=n).map(|k| -tau + tau * k as f64 / n as f64).collect()
        } else {
            vec![0.0]
        };
        let mut values = FieldSeries::zeros(basis, times.len());
        for (i, &s) in times.iter().enumerate() {
            values.set_field(i, &xi(s))?;
        }
        let last = times.len() - 1;
        let mut times = times;
        times[last] = 0.0;
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &FieldSeries {
        &self.values
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        self.values.basis()
    }

    /// `−τ`, the left end of the history window.
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn at_zero(&self) -> &[f64] {
        self.values.node(self.times.len() - 1)
    }

    /// `‖ξ‖∞`; the norm of a piecewise-linear path peaks at a node.
    pub fn sup_norm(&self) -> f64 {
        self.values.norms().into_iter().fold(0.0, f64::max)
    }

    pub(crate) fn eval_into(&self, s: f64, out: &mut [f64]) {
        let t = &self.times;
        if s <= t[0] {
            out.copy_from_slice(self.values.node(0));
            return;
        }
        if s >= 0.0 {
            out.copy_from_slice(self.at_zero());
            return;
        }
        let j = t.partition_point(|&v| v <= s) - 1;
        let th = (s - t[j]) / (t[j + 1] - t[j]);
        let (a, b) = (self.values.node(j), self.values.node(j + 1));
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            *o = x + th * (y - x);
        }
    }
}

/// Per-node Picard controls for a delayed argument that reaches the current cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub picard_tol: f64,
    pub picard_max: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { picard_tol: 1e-10, picard_max: 50 }
    }
}

/// Everything that defines one delayed problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub params: FracParams,
    pub basis: Arc<EigenBasis>,
    pub delay: DelaySpec,
    pub history: History,
    pub nonlinearity: NonlinearitySpec,
    /// Uniform grid on `[0, T]`.
    pub grid: TimeGrid,
    pub solver: SolverOptions,
}

impl ProblemSpec {
    pub fn horizon(&self) -> f64 {
        self.grid.t_end()
    }

    pub fn validate(&self) -> Result<(), DdeError> {
        self.params.validate()?;
        self.delay.validate()?;
        if !self.grid.is_uniform() {
            return Err(DdeError::InvalidProblem("the march needs a uniform time grid".into()));
        }
        if **self.history.basis() != *self.basis {
            return Err(DdeError::Spectral(SpectralError::BasisMismatch));
        }
        if self.history.start() > -self.delay.tau() + 1e-12 * self.delay.tau().max(1.0)
            && self.delay.tau() > 0.0
        {
            return Err(DdeError::InvalidProblem(format!(
                "history starts at {} but the delay reaches back to {}",
                self.history.start(),
                -self.delay.tau()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::Domain;

    #[test]
    fn delayed_times() {
        assert_eq!(DelaySpec::Constant { tau: 1.0 }.delayed_time(3.0), 2.0);
        assert_eq!(DelaySpec::Proportional { q: 0.5, tau: 1.0 }.delayed_time(4.0), 1.0);
        let c = DelaySpec::Custom { tau: 1.0, times: vec![0.0, 2.0], rho: vec![1.0, 0.0] };
        assert_eq!(c.delayed_time(1.0), 0.5);
        assert_eq!(c.delayed_time(5.0), 5.0);
        assert!(c.is_monotone_on(&[0.0, 1.0, 2.0, 3.0]));
    }

    #[test]
    fn delay_validation() {
        assert!(DelaySpec::Proportional { q: 0.0, tau: 1.0 }.validate().is_err());
        assert!(DelaySpec::Constant { tau: -1.0 }.validate().is_err());
        assert!(DelaySpec::Custom { tau: 0.0, times: vec![1.0, 0.5], rho: vec![0.0, 0.0] }.validate().is_err());
        assert!(DelaySpec::Proportional { q: 1.0, tau: 0.0 }.validate().is_ok());
    }

    #[test]
    fn history_interpolates_linearly() {
        let b = Arc::new(EigenBasis::new(Domain::Interval { length: PI }, 2).unwrap());
        let h = History::from_fn(b.clone(), 2.0, 4, |s| Field::new(b.clone(), vec![s, 1.0]).unwrap()).unwrap();
        let mut out = [0.0; 2];
        h.eval_into(-0.75, &mut out);
        assert!((out[0] + 0.75).abs() < 1e-15);
        assert_eq!(h.at_zero(), &[0.0, 1.0]);
        assert!((h.sup_norm() - 5f64.sqrt()).abs() < 1e-15);
    }
}
