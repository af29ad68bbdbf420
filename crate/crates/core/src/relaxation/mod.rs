//! The relaxation function `ω(t, μ)`: the solution of
//! `ω′ + μ(1 + γ ∂ᵗᵅ) ω = 0`, `ω(0) = 1`, with `∂ᵗᵅ` the Riemann-Liouville derivative.
//!
//! Two independent evaluation routes are provided:
//!
//! * [`omega_volterra`] integrates the equation once to the second-kind Volterra form
//!   `ω(t) = 1 − μ∫₀ᵗω − μγ (g₁₋α ∗ ω)(t)` and solves it by product integration, exact for
//!   piecewise-linear `ω` against the weakly singular kernel.
//! * [`omega_branch_cut`] inverts the Laplace transform `1/(s + γμ s^α + μ)` along the
//!   negative real axis.
//!
//! [`check_bounds`] and [`check_complete_monotonicity`] turn the known qualitative
//! properties of `ω` into [`BoundReport`](crate::report::BoundReport)s.

mod branch_cut;
mod checks;
mod grid;
mod scalar;
mod volterra;
pub(crate) mod weights;

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

pub use branch_cut::{omega_branch_cut, omega_branch_cut_with, BranchCutOptions};
pub use checks::{
    check_bounds, check_complete_monotonicity, check_mu_monotonicity, check_unit_interval,
    MONOTONICITY_TOL_FACTOR,
};
pub use grid::{GridKind, TimeGrid};
pub use scalar::scalar_inhomogeneous;
pub use volterra::{
    omega_volterra, omega_volterra_batch, omega_volterra_with, ErrorEstimate, VolterraOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelaxationError {
    #[error("invalid fractional parameters: {0}")]
    InvalidParams(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("spectral parameter must be >= 0, got {0}")]
    NegativeMu(f64),
    #[error("implicit step failed at node {node} (t = {t}): {reason}")]
    NonConvergent { node: usize, t: f64, reason: String },
    #[error("branch-cut quadrature did not converge: change {last_change:e} after {levels} levels")]
    QuadratureNonConvergent { levels: usize, last_change: f64 },
    #[error("evaluation time must be > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("branch-cut route needs mu > 0, got {0}")]
    NonPositiveMu(f64),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("operation needs a uniform grid")]
    NonUniformGrid,
    #[error("{0}")]
    Unsupported(String),
}

/// The pair `(α, γ)` of the fractional model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl FracParams {
    /// `0 < α < 1`, `γ > 0`.
    pub fn new(alpha: f64, gamma: f64) -> Result<Self, RelaxationError> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(RelaxationError::InvalidParams(format!(
                "gamma must be positive, got {gamma} (use FracParams::exponential_oracle for gamma = 0)"
            )));
        }
        Self::checked(alpha, gamma)
    }

    /// `γ = 0`, for which `ω(t, μ) = exp(−μt)`.
    pub fn exponential_oracle(alpha: f64) -> Result<Self, RelaxationError> {
        Self::checked(alpha, 0.0)
    }

    fn checked(alpha: f64, gamma: f64) -> Result<Self, RelaxationError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(RelaxationError::InvalidParams(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self { alpha, gamma })
    }

    pub fn validate(&self) -> Result<(), RelaxationError> {
        Self::checked(self.alpha, self.gamma).and_then(|_| {
            if self.gamma >= 0.0 && self.gamma.is_finite() {
                Ok(())
            } else {
                Err(RelaxationError::InvalidParams(format!("gamma = {}", self.gamma)))
            }
        })
    }

    pub fn is_oracle(&self) -> bool {
        self.gamma == 0.0
    }

    /// Riemann-Liouville kernel `g_β(t) = t^{β−1}/Γ(β)`.
    pub fn kernel(beta: f64, t: f64) -> f64 {
        t.powf(beta - 1.0) / gamma(beta)
    }

    /// `g_{2−α}(t)`, which enters the decay bound `μω(t) ≤ (t + g_{2−α}(t))^{-1}`.
    pub fn g_two_minus_alpha(&self, t: f64) -> f64 {
        Self::kernel(2.0 - self.alpha, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Volterra,
    BranchCut,
}

/// `ω(·, μ)` tabulated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationSamples {
    pub mu: f64,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub method: Method,
    /// Step-refinement estimate of the maximal nodal error.
    pub est_error: f64,
}

impl RelaxationSamples {
    /// Property-check tolerance: `10·est_error` plus a rounding floor.
    pub fn tolerance(&self) -> f64 {
        10.0 * self.est_error + 64.0 * f64::EPSILON
    }

    /// Linear interpolation of the samples at `t ∈ [0, t_end]`.
    pub fn interpolate(&self, t: f64) -> f64 {
        let nodes = self.grid.nodes();
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= self.grid.t_end() {
            return *self.values.last().unwrap();
        }
        let i = nodes.partition_point(|&x| x <= t);
        let (t0, t1) = (nodes[i - 1], nodes[i]);
        let w = (t - t0) / (t1 - t0);
        self.values[i - 1] * (1.0 - w) + self.values[i] * w
    }

    /// Debug dump: `t,omega,err` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,omega,err")?;
        for (t, w) in self.grid.nodes().iter().zip(&self.values) {
            writeln!(out, "{t:.17e},{w:.17e},{:.6e}", self.est_error)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(FracParams::new(0.5, 1.0).is_ok());
        assert!(FracParams::new(0.0, 1.0).is_err());
        assert!(FracParams::new(1.0, 1.0).is_err());
        assert!(FracParams::new(0.5, 0.0).is_err());
        assert!(FracParams::exponential_oracle(0.5).unwrap().is_oracle());
    }

    #[test]
    fn kernel_values() {
        // g_1 ≡ 1, g_2(t) = t, g_{1/2}(1) = 1/√π
        assert!((FracParams::kernel(1.0, 3.0) - 1.0).abs() < 1e-14);
        assert!((FracParams::kernel(2.0, 3.0) - 3.0).abs() < 1e-13);
        let pi = std::f64::consts::PI;
        assert!((FracParams::kernel(0.5, 1.0) - 1.0 / pi.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn csv_dump_has_header() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let s = RelaxationSamples {
            mu: 1.0,
            grid,
            values: vec![1.0, 0.8, 0.7],
            method: Method::Volterra,
            est_error: 1e-6,
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,omega,err\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
