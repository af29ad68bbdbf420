//! Numerical lab for the delayed semilinear generalized Rayleigh-Stokes equation
//!
//! ```text
//! ∂ₜu − (1 + γ∂ₜ^α)Δu = f(t, u(t − ρ(t)))   in Ω × (0, T],   u = 0 on ∂Ω
//! ```
//!
//! - [`relaxation`]: the scalar relaxation function `ω(t, μ)` and its checks.
//! - [`convolution`]: product-integration Laplace convolution shared by every solver.
//! - [`spectral`]: Dirichlet eigenbasis, fields, the resolvent `S(t)` and the Cauchy operator.
//! - [`dde`]: mild solutions of the delayed problem, growth metadata and smallness radii.
//! - [`halanay`]: the Halanay-type inequality for the relaxation kernel.
//! - [`lab`]: config-driven experiments and their run records.
//! - [`report`]: claimed-vs-measured bound records.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convolution;
pub mod dde;
pub mod halanay;
pub(crate) mod kernels;
pub mod lab;
pub mod relaxation;
pub mod report;
pub mod spectral;
