use serde::{Deserialize, Serialize};

use super::{DdeError, NonlinearitySpec, Profile};
use crate::spectral::ResolventTable;

/// `(ω(·,λ₁) ∗ p)(tᵢ)` on the table grid, through the row-0 product weights.
pub fn omega_conv_p(table: &ResolventTable, p: &Profile) -> Vec<f64> {
    let samples: Vec<f64> = table.grid().nodes().iter().map(|&t| p.eval(t)).collect();
    table.kernel(0).apply(&samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessOptions {
    /// Slack added to `ℓ`; `None` picks `0.05(1 − ℓM)/M`.
    pub zeta: Option<f64>,
    /// Upper end of the `η` scan.
    pub r_max: f64,
}

impl Default for SmallnessOptions {
    fn default() -> Self {
        Self { zeta: None, r_max: 10.0 }
    }
}

/// Slack default shared with the stability constant: `0.05(1 − ℓM)/M`, or `0.05` when `M = 0`.
pub(crate) fn default_slack(ell: f64, m: f64) -> f64 {
    if m > 0.0 {
        0.05 * (1.0 - ell * m) / m
    } else {
        0.05
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallnessRadius {
    /// `min(η, δ₀)`: admissible `‖ξ‖∞`.
    pub delta: f64,
    /// Invariant-ball radius: `G(r)/r ≤ ℓ + ζ` on `(0, η]`.
    pub eta: f64,
    pub delta0: f64,
    pub ell: f64,
    /// `sup (ω(·,λ₁) ∗ p)` over the table grid.
    pub m: f64,
    pub zeta: f64,
}

const SCAN_START: f64 = 1e-6;
const SCAN_PER_DECADE: usize = 200;

/// Smallness radius from the fixed-point construction, with the infimum taken over the
/// table grid.
///
/// `η` is the last point of a geometric scan of `[10⁻⁶, r_max]` before `G(r)/r` first
/// exceeds `ℓ + ζ`.
pub fn smallness_radius(
    nonlin: &NonlinearitySpec,
    table: &ResolventTable,
    opts: SmallnessOptions,
) -> Result<SmallnessRadius, DdeError> {
    if nonlin.growth_g(1.0).is_none() {
        return Err(DdeError::MissingMetadata(format!(
            "smallness radius needs a growth function G, envelope is {:?}",
            nonlin.envelope
        )));
    }
    let ell = nonlin.ell();
    let wp = omega_conv_p(table, &nonlin.p);
    let m = wp.iter().copied().fold(0.0, f64::max);
    if !(ell * m < 1.0) {
        return Err(DdeError::HypothesisFails(format!("l*M = {} >= 1", ell * m)));
    }
    let zeta = opts.zeta.unwrap_or_else(|| default_slack(ell, m));
    let c = ell + zeta;
    if !(zeta > 0.0) || !(c * m < 1.0) {
        return Err(DdeError::HypothesisFails(format!(
            "(l + zeta)M = {} must be < 1 with zeta = {zeta} > 0",
            c * m
        )));
    }
    if !(opts.r_max > SCAN_START) {
        return Err(DdeError::InvalidProblem(format!("r_max must exceed {SCAN_START}")));
    }
    let decades = (opts.r_max / SCAN_START).log10();
    let points = (decades * SCAN_PER_DECADE as f64).ceil() as usize;
    let mut eta = None;
    for j in 0..=points {
        let r = (SCAN_START * 10f64.powf(j as f64 / SCAN_PER_DECADE as f64)).min(opts.r_max);
        let g = nonlin.growth_g(r).expect("checked above");
        if g / r > c {
            break;
        }
        eta = Some(r);
    }
    let eta = eta.ok_or_else(|| {
        DdeError::HypothesisFails(format!("G(r)/r exceeds l + zeta = {c} already at r = {SCAN_START}"))
    })?;
    let inf = wp
        .iter()
        .enumerate()
        .map(|(i, &x)| (1.0 - c * x) / (table.omega(0, i) + c * x))
        .fold(f64::INFINITY, f64::min);
    let delta0 = eta * inf;
    Ok(SmallnessRadius { delta: eta.min(delta0), eta, delta0, ell, m, zeta })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::relaxation::{FracParams, TimeGrid};
    use crate::spectral::{Domain, EigenBasis};

    fn table(t_end: f64, steps: usize) -> ResolventTable {
        let p = FracParams::new(0.5, 1.0).unwrap();
        let b = Arc::new(EigenBasis::new(Domain::Interval { length: PI }, 2).unwrap());
        ResolventTable::build(p, b, &TimeGrid::uniform(t_end, steps).unwrap()).unwrap()
    }

    #[test]
    fn zero_profile_collapses_to_eta() {
        let t = table(5.0, 100);
        let r = smallness_radius(&NonlinearitySpec::quadratic(Profile::Zero), &t, SmallnessOptions::default()).unwrap();
        assert_eq!(r.m, 0.0);
        assert_eq!(r.delta0, r.eta);
        assert_eq!(r.delta, r.eta);
    }

    #[test]
    fn quadratic_constant_profile_meets_lower_bound() {
        let t = table(20.0, 400);
        let p0 = 0.5;
        let r = smallness_radius(&NonlinearitySpec::quadratic(Profile::Constant { value: p0 }), &t, SmallnessOptions::default())
            .unwrap();
        assert_eq!(r.ell, 0.0);
        assert!(r.m <= p0 / t.basis().lambda1() * (1.0 + 1e-6));
        let lower = r.eta * (1.0 - r.zeta * r.m) / (1.0 + r.zeta * r.m);
        assert!(r.delta0 >= lower && r.delta0 > 0.0);
        // G(r)/r = r, so the scan stops just below ζ
        assert!(r.eta <= r.zeta && r.eta > r.zeta / 10f64.powf(1.0 / 200.0) * 0.999);
    }

    #[test]
    fn failing_hypothesis_is_an_error() {
        let t = table(20.0, 400);
        let f = NonlinearitySpec::linear(2.0);
        assert!(matches!(
            smallness_radius(&f, &t, SmallnessOptions::default()),
            Err(DdeError::HypothesisFails(_))
        ));
    }

    #[test]
    fn omega_conv_p_of_constant_matches_integral() {
        let t = table(4.0, 200);
        let w = omega_conv_p(&t, &Profile::Constant { value: 1.0 });
        let direct = t.kernel(0).apply(&vec![1.0; 201]);
        assert_eq!(w, direct);
        assert!(w.iter().zip(t.row(0).values.iter()).all(|(c, o)| *c <= 1.0 - o + 1e-6));
    }
}
