use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::weights::{cell_moments, uniform_moments};
use super::{FracParams, Method, RelaxationError, RelaxationSamples, TimeGrid};
use crate::kernels::dot;

/// How `est_error` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorEstimate {
    None,
    /// Compare against the solve on every other node (cheap; over-estimates the error of
    /// the returned values).
    Coarsen,
    /// Compare against the solve on the bisected grid.
    Halve,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolterraOptions {
    pub estimate: ErrorEstimate,
    /// With [`ErrorEstimate::Halve`], return `(4 ω_{h/2} − ω_h)/3` at the grid nodes.
    pub richardson: bool,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        Self { estimate: ErrorEstimate::Halve, richardson: false }
    }
}

impl VolterraOptions {
    pub fn coarsen() -> Self {
        Self { estimate: ErrorEstimate::Coarsen, richardson: false }
    }

    pub fn richardson() -> Self {
        Self { estimate: ErrorEstimate::Halve, richardson: true }
    }
}

/// `ω(·, μ)` on `grid` with the default step-halving error estimate.
pub fn omega_volterra(
    params: FracParams,
    mu: f64,
    grid: &TimeGrid,
) -> Result<RelaxationSamples, RelaxationError> {
    omega_volterra_with(params, mu, grid, VolterraOptions::default())
}

pub fn omega_volterra_with(
    params: FracParams,
    mu: f64,
    grid: &TimeGrid,
    opts: VolterraOptions,
) -> Result<RelaxationSamples, RelaxationError> {
    Ok(omega_volterra_batch(params, &[mu], grid, opts)?.pop().unwrap())
}

/// One solve per `μ` sharing the product-integration weights. Output order follows `mus`
/// and does not depend on scheduling.
pub fn omega_volterra_batch(
    params: FracParams,
    mus: &[f64],
    grid: &TimeGrid,
    opts: VolterraOptions,
) -> Result<Vec<RelaxationSamples>, RelaxationError> {
    params.validate()?;
    if let Some(&mu) = mus.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
        return Err(RelaxationError::NegativeMu(mu));
    }
    let base = solve_raw(params, mus, grid)?;
    let (values, errors): (Vec<Vec<f64>>, Vec<f64>) = match opts.estimate {
        ErrorEstimate::None => {
            let n = base.len();
            (base, vec![0.0; n])
        }
        ErrorEstimate::Coarsen => match grid.coarsened() {
            Some(coarse) => {
                let rough = solve_raw(params, mus, &coarse)?;
                let errs = base
                    .iter()
                    .zip(&rough)
                    .map(|(b, r)| max_diff(r.iter().zip(b.iter().step_by(2))))
                    .collect();
                (base, errs)
            }
            None => {
                let n = base.len();
                (base, vec![0.0; n])
            }
        },
        ErrorEstimate::Halve => {
            let fine = solve_raw(params, mus, &grid.refined())?;
            let mut vals = Vec::with_capacity(mus.len());
            let mut errs = Vec::with_capacity(mus.len());
            for (b, f) in base.into_iter().zip(&fine) {
                let diff = max_diff(b.iter().zip(f.iter().step_by(2)));
                if opts.richardson {
                    vals.push(
                        b.iter().zip(f.iter().step_by(2)).map(|(c, f)| (4.0 * f - c) / 3.0).collect(),
                    );
                    // error of the fine solve for a second-order expansion; the
                    // extrapolated values are at least this good
                    errs.push(diff / 3.0);
                } else {
                    vals.push(b);
                    errs.push(diff);
                }
            }
            (vals, errs)
        }
    };
    Ok(mus
        .iter()
        .zip(values)
        .zip(errors)
        .map(|((&mu, values), est_error)| RelaxationSamples {
            mu,
            grid: grid.clone(),
            values,
            method: Method::Volterra,
            est_error,
        })
        .collect())
}

fn max_diff<'a>(pairs: impl Iterator<Item = (&'a f64, &'a f64)>) -> f64 {
    pairs.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Raw product-integration solve, one value vector per `μ`.
pub(crate) fn solve_raw(
    params: FracParams,
    mus: &[f64],
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>, RelaxationError> {
    let frac = if params.gamma == 0.0 { 0.0 } else { params.gamma / gamma(1.0 - params.alpha) };
    match grid.step() {
        Some(h) => {
            let k = grid.len();
            let (far, near) = uniform_moments(params.alpha, h, k);
            // comb[m] = weight of the node m steps behind the current one (m >= 1)
            let mut comb_rev = vec![0.0; k];
            for m in 1..k {
                comb_rev[k - 1 - m] = far[m - 1] + near[m];
            }
            mus.par_iter()
                .map(|&mu| solve_uniform(mu, frac, h, grid, &far, near[0], &comb_rev))
                .collect()
        }
        None => solve_general(params.alpha, frac, mus, grid),
    }
}

fn solve_uniform(
    mu: f64,
    frac: f64,
    h: f64,
    grid: &TimeGrid,
    far: &[f64],
    near0: f64,
    comb_rev: &[f64],
) -> Result<Vec<f64>, RelaxationError> {
    let k = grid.len();
    let mut w = vec![0.0; k];
    w[0] = 1.0;
    if mu == 0.0 {
        w.fill(1.0);
        return Ok(w);
    }
    let denom = 1.0 + mu * 0.5 * h + mu * frac * near0;
    // trapezoid integral of ω over [0, t_{i-1}]
    let mut cum = 0.0;
    for i in 1..k {
        let hist = dot(&w[1..i], &comb_rev[k - i..k - 1]) + far[i - 1] * w[0];
        let rhs = 1.0 - mu * (cum + 0.5 * h * w[i - 1]) - mu * frac * hist;
        let v = rhs / denom;
        if !v.is_finite() {
            return Err(RelaxationError::NonConvergent {
                node: i,
                t: grid.nodes()[i],
                reason: format!("non-finite value {v}"),
            });
        }
        w[i] = v;
        cum += 0.5 * h * (w[i - 1] + v);
    }
    Ok(w)
}

fn solve_general(
    alpha: f64,
    frac: f64,
    mus: &[f64],
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>, RelaxationError> {
    let t = grid.nodes();
    let k = t.len();
    let mut out: Vec<Vec<f64>> = mus.iter().map(|_| {
        let mut v = vec![0.0; k];
        v[0] = 1.0;
        v
    }).collect();
    let mut cums = vec![0.0; mus.len()];
    let mut coeff = vec![0.0; k];
    for i in 1..k {
        // coefficient of node j in the fractional history sum, j < i
        coeff[..i].fill(0.0);
        let mut near_last = 0.0;
        for j in 0..i {
            let h = t[j + 1] - t[j];
            let a = t[i] - t[j + 1];
            let (f, n) = cell_moments(alpha, a, h);
            coeff[j] += f;
            if j + 1 < i {
                coeff[j + 1] += n;
            } else {
                near_last = n;
            }
        }
        let h_last = t[i] - t[i - 1];
        for (m, (&mu, w)) in mus.iter().zip(out.iter_mut()).enumerate() {
            if mu == 0.0 {
                w[i] = 1.0;
                continue;
            }
            let hist = dot(&w[..i], &coeff[..i]);
            let rhs = 1.0 - mu * (cums[m] + 0.5 * h_last * w[i - 1]) - mu * frac * hist;
            let denom = 1.0 + 0.5 * mu * h_last + mu * frac * near_last;
            let v = rhs / denom;
            if !v.is_finite() || !(denom > 0.0) {
                return Err(RelaxationError::NonConvergent {
                    node: i,
                    t: t[i],
                    reason: format!("denominator {denom}, value {v}"),
                });
            }
            w[i] = v;
            cums[m] += 0.5 * h_last * (w[i - 1] + v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_zero_is_constant_one() {
        let p = FracParams::new(0.5, 1.0).unwrap();
        for grid in [TimeGrid::uniform(1.0, 16).unwrap(), TimeGrid::graded(1.0, 16, 2.0).unwrap()] {
            let s = omega_volterra(p, 0.0, &grid).unwrap();
            assert!(s.values.iter().all(|&v| v == 1.0));
            assert_eq!(s.est_error, 0.0);
        }
    }

    #[test]
    fn starts_at_one() {
        let p = FracParams::new(0.3, 2.0).unwrap();
        let s = omega_volterra(p, 7.0, &TimeGrid::uniform(2.0, 40).unwrap()).unwrap();
        assert_eq!(s.values[0], 1.0);
    }

    #[test]
    fn uniform_and_general_paths_agree() {
        let p = FracParams::new(0.6, 1.5).unwrap();
        let uni = TimeGrid::uniform(3.0, 60).unwrap();
        // same nodes, but forced through the per-row weight path
        let mut nodes = uni.nodes().to_vec();
        nodes[1] *= 1.0 + 1e-7;
        let custom = TimeGrid::from_nodes(nodes).unwrap();
        assert!(!custom.is_uniform());
        let a = solve_raw(p, &[2.0], &uni).unwrap();
        let b = solve_raw(p, &[2.0], &custom).unwrap();
        let diff = a[0].iter().zip(&b[0]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6, "diff {diff}");
    }

    #[test]
    fn negative_mu_rejected() {
        let p = FracParams::new(0.5, 1.0).unwrap();
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(matches!(omega_volterra(p, -1.0, &g), Err(RelaxationError::NegativeMu(_))));
    }

    #[test]
    fn batch_is_order_independent() {
        let p = FracParams::new(0.5, 1.0).unwrap();
        let g = TimeGrid::uniform(2.0, 50).unwrap();
        let a = omega_volterra_batch(p, &[1.0, 4.0, 9.0], &g, VolterraOptions::coarsen()).unwrap();
        let b = omega_volterra_batch(p, &[9.0, 1.0], &g, VolterraOptions::coarsen()).unwrap();
        assert_eq!(a[2].values, b[0].values);
        assert_eq!(a[0].values, b[1].values);
    }
}
