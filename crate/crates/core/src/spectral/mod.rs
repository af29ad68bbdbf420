//! Dirichlet-Laplacian eigenbasis on separable model domains and the spectral form of
//! the resolvent `S(t)` and the Cauchy operator.
//!
//! Fields are stored by their coefficients in the orthonormal eigenbasis, so the
//! `L²` norm is the Euclidean norm of the coefficient vector and `S(t)` is diagonal.

mod field;
mod resolvent;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::relaxation::RelaxationError;

pub use field::{project, synthesize, write_field_csv, Field, FieldSeries, Mesh, Transform};
pub use resolvent::{apply_resolvent, cauchy_convolution, cauchy_convolution_fft, ResolventTable};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("mode count must be at least 1, got {0}")]
    InvalidModeCount(usize),
    #[error("fields live on different bases")]
    BasisMismatch,
    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("time index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed resolvent file: {0}")]
    Format(String),
}

/// Separable model domain with closed-form Dirichlet eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

impl Domain {
    pub fn validate(&self) -> Result<(), SpectralError> {
        let ok = match *self {
            Domain::Interval { length } => length > 0.0 && length.is_finite(),
            Domain::Rectangle { lx, ly } => {
                lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SpectralError::InvalidDomain(format!("side lengths must be positive: {self:?}")))
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn extents(&self) -> Vec<f64> {
        match *self {
            Domain::Interval { length } => vec![length],
            Domain::Rectangle { lx, ly } => vec![lx, ly],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.extents()).all(|(&xi, l)| (0.0..=l).contains(&xi))
    }
}

/// Index of an eigenfunction: `n` on the interval, `(m, n)` on the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Mode {
    Line(usize),
    Grid(usize, usize),
}

/// The first `N` Dirichlet eigenpairs, ascending in `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenBasis {
    domain: Domain,
    lambdas: Vec<f64>,
    modes: Vec<Mode>,
}

impl EigenBasis {
    /// Closed-form eigenvalues; ties on the rectangle are broken by lexicographic `(m, n)`.
    pub fn new(domain: Domain, n: usize) -> Result<Self, SpectralError> {
        domain.validate()?;
        if n == 0 {
            return Err(SpectralError::InvalidModeCount(n));
        }
        let (lambdas, modes) = match domain {
            Domain::Interval { length } => {
                let k = (PI / length).powi(2);
                (1..=n).map(|j| ((j * j) as f64 * k, Mode::Line(j))).unzip()
            }
            Domain::Rectangle { lx, ly } => {
                let (kx, ky) = ((PI / lx).powi(2), (PI / ly).powi(2));
                let mut all: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
                for m in 1..=n {
                    for j in 1..=n {
                        all.push(((m * m) as f64 * kx + (j * j) as f64 * ky, m, j));
                    }
                }
                all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
                all.truncate(n);
                all.into_iter().map(|(l, m, j)| (l, Mode::Grid(m, j))).unzip()
            }
        };
        Ok(Self { domain, lambdas, modes })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `λ₁`, the constant in every stability bound.
    pub fn lambda1(&self) -> f64 {
        self.lambdas[0]
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    /// `φ_k(x)` for the `k`-th mode (0-based).
    pub fn phi(&self, k: usize, x: &[f64]) -> f64 {
        match (self.domain, self.modes[k]) {
            (Domain::Interval { length }, Mode::Line(n)) => {
                (2.0 / length).sqrt() * (n as f64 * PI * x[0] / length).sin()
            }
            (Domain::Rectangle { lx, ly }, Mode::Grid(m, n)) => {
                2.0 / (lx * ly).sqrt()
                    * (m as f64 * PI * x[0] / lx).sin()
                    * (n as f64 * PI * x[1] / ly).sin()
            }
            _ => unreachable!("mode kind always matches the domain"),
        }
    }

    /// Largest per-axis frequency index among the modes.
    pub fn max_index(&self) -> usize {
        self.modes
            .iter()
            .map(|m| match *m {
                Mode::Line(n) => n,
                Mode::Grid(a, b) => a.max(b),
            })
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_of_length_pi_has_square_eigenvalues() {
        let b = EigenBasis::new(Domain::Interval { length: PI }, 3).unwrap();
        assert_eq!(b.lambdas(), &[1.0, 4.0, 9.0]);
        assert_eq!(EigenBasis::new(Domain::Interval { length: PI }, 1).unwrap().lambda1(), 1.0);
    }

    #[test]
    fn square_ties_break_lexicographically() {
        let b = EigenBasis::new(Domain::Rectangle { lx: PI, ly: PI }, 4).unwrap();
        assert_eq!(b.lambdas(), &[2.0, 5.0, 5.0, 8.0]);
        assert_eq!(b.modes()[1], Mode::Grid(1, 2));
        assert_eq!(b.modes()[2], Mode::Grid(2, 1));
    }

    #[test]
    fn rectangle_matches_brute_force_enumeration() {
        let (lx, ly) = (1.0, 2.5);
        let b = EigenBasis::new(Domain::Rectangle { lx, ly }, 30).unwrap();
        let mut all = Vec::new();
        for m in 1..40 {
            for n in 1..40 {
                all.push((m as f64 * PI / lx).powi(2) + (n as f64 * PI / ly).powi(2));
            }
        }
        all.sort_by(f64::total_cmp);
        for (a, e) in b.lambdas().iter().zip(&all) {
            assert!((a - e).abs() <= 1e-12 * e);
        }
        assert!(b.lambdas().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(EigenBasis::new(Domain::Interval { length: PI }, 0).is_err());
        assert!(EigenBasis::new(Domain::Interval { length: -1.0 }, 3).is_err());
        assert!(EigenBasis::new(Domain::Rectangle { lx: 1.0, ly: 0.0 }, 3).is_err());
    }

    #[test]
    fn phi_at_midpoint() {
        let b = EigenBasis::new(Domain::Interval { length: PI }, 2).unwrap();
        assert!((b.phi(0, &[PI / 2.0]) - (2.0 / PI).sqrt()).abs() < 1e-15);
    }
}
