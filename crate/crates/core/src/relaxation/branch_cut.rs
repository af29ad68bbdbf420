//! Laplace inversion of `ω̂(s) = 1/(s + γμ s^α + μ)` along the branch cut.
//!
//! `ω̂` has no poles on the principal sheet, so deforming the Bromwich contour onto the
//! negative real axis leaves
//!
//! ```text
//! ω(t) = ∫₀^∞ e^{−rt} H(r) dr,
//! H(r) = (γμ sin πα / π) · r^α / [ (μ − r + γμ r^α cos πα)² + (γμ r^α sin πα)² ],
//! ```
//!
//! the jump of `ω̂` across the cut divided by `2πi`. `H ≥ 0`, which is Bernstein's
//! characterisation of complete monotonicity.
//!
//! The integral is evaluated with the exp-sinh rule `r = s₀·exp((π/2) sinh x)` and the
//! trapezoidal rule in `x`, halving the step until two levels agree.

use std::f64::consts::{FRAC_PI_2, PI};

use super::{FracParams, RelaxationError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchCutOptions {
    /// Absolute change between successive levels at which the rule stops.
    pub abs_tol: f64,
    pub max_levels: usize,
}

impl Default for BranchCutOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-9, max_levels: 12 }
    }
}

pub fn omega_branch_cut(params: FracParams, mu: f64, t: f64) -> Result<f64, RelaxationError> {
    omega_branch_cut_with(params, mu, t, BranchCutOptions::default())
}

pub fn omega_branch_cut_with(
    params: FracParams,
    mu: f64,
    t: f64,
    opts: BranchCutOptions,
) -> Result<f64, RelaxationError> {
    params.validate()?;
    if !(t > 0.0) {
        return Err(RelaxationError::NonPositiveTime(t));
    }
    if !(mu > 0.0) {
        return Err(RelaxationError::NonPositiveMu(mu));
    }
    if params.gamma == 0.0 {
        // the cut degenerates to a simple pole at −μ
        return Ok((-mu * t).exp());
    }
    let jump = Jump::new(params, mu);
    // centre the map on the scale where e^{−rt} starts to cut the integrand off
    let s0 = 1.0 / t;
    let term = |x: f64| -> f64 {
        let u = FRAC_PI_2 * x.sinh();
        if !(-700.0..=700.0).contains(&u) {
            return 0.0;
        }
        let r = s0 * u.exp();
        let rt = r * t;
        if rt > 745.0 || r == 0.0 {
            return 0.0;
        }
        let v = (-rt).exp() * jump.eval(r) * r * FRAC_PI_2 * x.cosh();
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    // level 0: step 1 on [−X, X]
    const X: f64 = 6.0;
    let mut h = 1.0;
    let mut sum = 0.0;
    let mut x = -X;
    while x <= X + 1e-12 {
        sum += term(x);
        x += h;
    }
    let mut estimate = sum * h;
    let mut last_change = f64::INFINITY;
    for level in 1..=opts.max_levels {
        h *= 0.5;
        let mut odd = 0.0;
        let mut x = -X + h;
        while x < X {
            odd += term(x);
            x += 2.0 * h;
        }
        sum += odd;
        let next = sum * h;
        last_change = (next - estimate).abs();
        estimate = next;
        if level >= 3 && last_change <= opts.abs_tol {
            return Ok(estimate);
        }
    }
    Err(RelaxationError::QuadratureNonConvergent { levels: opts.max_levels, last_change })
}

struct Jump {
    gm: f64,
    mu: f64,
    alpha: f64,
    cos: f64,
    sin: f64,
}

impl Jump {
    fn new(p: FracParams, mu: f64) -> Self {
        let (sin, cos) = (PI * p.alpha).sin_cos();
        Self { gm: p.gamma * mu, mu, alpha: p.alpha, cos, sin }
    }

    #[inline]
    fn eval(&self, r: f64) -> f64 {
        let ra = r.powf(self.alpha);
        let re = self.mu - r + self.gm * ra * self.cos;
        let im = self.gm * ra * self.sin;
        // divide before squaring to stay in range for very large r
        let scale = re.abs().max(im.abs());
        if scale == 0.0 {
            return 0.0;
        }
        let (a, b) = (re / scale, im / scale);
        (im / PI) / (scale * scale * (a * a + b * b))
    }
}
