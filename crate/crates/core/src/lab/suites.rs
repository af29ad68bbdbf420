use rayon::prelude::*;

use super::{ExperimentConfig, ExperimentKind, HalanayCase, LabError, RunRecord};
use crate::dde::DelaySpec;
use crate::halanay::{bound_global, bound_limsup, build_extremal, verify_premise, ExtremalOptions};
use crate::relaxation::{
    check_bounds, check_complete_monotonicity, check_mu_monotonicity, check_unit_interval,
    omega_branch_cut, omega_volterra_batch, FracParams, TimeGrid, VolterraOptions,
};
use crate::report::BoundReport;

/// Relative tolerance of the Volterra / branch-cut comparison.
pub const CROSS_METHOD_TOL: f64 = 1e-6;

/// Relaxation or Halanay property suite, by `experiment.kind`.
pub fn run_suites(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    match cfg.experiment.kind {
        ExperimentKind::RelaxationSuite => relaxation_suite(cfg),
        ExperimentKind::HalanaySuite => halanay_suite(cfg),
        k => Err(LabError::Config(format!("{k:?} is not a suite"))),
    }
}

fn label(p: FracParams, mu: f64) -> String {
    format!("alpha={},gamma={},mu={mu}", p.alpha, p.gamma)
}

/// Property reports of `ω` on a uniform grid for one `(α, γ)` and every `μ`.
fn properties(p: FracParams, mus: &[f64], h: f64, t_end: f64) -> Result<Vec<BoundReport>, LabError> {
    let grid = TimeGrid::with_step(h, t_end)?;
    let samples = omega_volterra_batch(p, mus, &grid, VolterraOptions::coarsen())?;
    let mut out = Vec::new();
    for s in &samples {
        let l = label(p, s.mu);
        let mut reps = check_unit_interval(s);
        reps.extend(check_bounds(s, p));
        reps.push(check_complete_monotonicity(s, 3)?);
        out.extend(reps.into_iter().map(|mut r| {
            r.name = format!("{}[{l}]", r.name);
            r
        }));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].mu.total_cmp(&samples[b].mu));
    for w in order.windows(2) {
        let mut r = check_mu_monotonicity(&samples[w[0]], &samples[w[1]])?;
        r.name = format!("{}[{}->{}]", r.name, label(p, samples[w[0]].mu), samples[w[1]].mu);
        out.push(r);
    }
    Ok(out)
}

/// Largest relative Volterra / branch-cut gap at `times`, per `μ`.
///
/// Uses a geometric grid from `10⁻¹⁰` (100 points per decade, steps capped at `0.01`) and
/// Richardson extrapolation; times that are not grid nodes are read by interpolation.
pub fn cross_method(p: FracParams, mus: &[f64], times: &[f64], t_end: f64) -> Result<Vec<BoundReport>, LabError> {
    if let Some(t) = times.iter().find(|&&t| !(t > 0.0 && t <= t_end)) {
        return Err(LabError::Config(format!("comparison time {t} outside (0, {t_end}]")));
    }
    let grid = TimeGrid::geometric_capped(1e-10, t_end, 100, 0.01)?;
    let samples = omega_volterra_batch(p, mus, &grid, VolterraOptions::richardson())?;
    let mut out = Vec::new();
    for s in &samples {
        let mut worst = 0.0f64;
        for &t in times {
            let i = grid.nearest_index(t);
            let vol = if (grid.nodes()[i] - t).abs() <= 1e-12 * t { s.values[i] } else { s.interpolate(t) };
            let bc = omega_branch_cut(p, s.mu, t)?;
            worst = worst.max((vol - bc).abs() / bc.abs());
        }
        out.push(
            BoundReport::scalar(format!("cross_method[{}]", label(p, s.mu)), CROSS_METHOD_TOL, worst, 0.0)
                .with_note(format!("max relative gap {worst:.2e}")),
        );
    }
    Ok(out)
}

fn relaxation_suite(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let e = &cfg.experiment;
    let mut pairs = Vec::new();
    for &a in &e.alphas {
        for &g in &e.gammas {
            pairs.push(FracParams::new(a, g)?);
        }
    }
    let per_pair: Vec<Vec<BoundReport>> = pairs
        .par_iter()
        .map(|&p| {
            let mut r = cross_method(p, &e.mus, &e.times, e.suite_horizon)?;
            r.extend(properties(p, &e.mus, cfg.grid.h, e.suite_horizon)?);
            Ok(r)
        })
        .collect::<Result<_, LabError>>()?;
    let mut rec = RunRecord::new(cfg);
    rec.reports = per_pair.into_iter().flatten().collect();
    rec.value("parameter_points", (pairs.len() * e.mus.len()) as f64);
    Ok(rec.finish())
}

fn case_label(c: &HalanayCase) -> String {
    let b = match c.b {
        super::ForcingSpec::Zero => "zero".to_string(),
        super::ForcingSpec::Constant { value } => format!("const:{value}"),
        super::ForcingSpec::Ramp { value, ramp_time } => format!("ramp:{value}/{ramp_time}"),
    };
    match c.q {
        Some(q) => format!("mu={},a={},b={b},q={q},tau={}", c.mu, c.a, c.tau),
        None => format!("mu={},a={},b={b},tau={}", c.mu, c.a, c.tau),
    }
}

/// Extremal instances on `[0, 200/μ]`: premise, global bound, tail level, decay when
/// `b = 0`, and the measured contraction against `a/μ`.
fn halanay_suite(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let params = cfg.params()?;
    let e = &cfg.experiment;
    let results: Vec<(Vec<BoundReport>, f64, Vec<u8>)> = e
        .halanay
        .par_iter()
        .map(|c| {
            let t_end = 200.0 / c.mu;
            let grid = TimeGrid::uniform(t_end, e.halanay_steps)?;
            let delay = match c.q {
                Some(q) => DelaySpec::Proportional { q, tau: c.tau },
                None => DelaySpec::Constant { tau: c.tau },
            };
            let (pt, pv) = if c.tau > 0.0 { (vec![-c.tau, 0.0], vec![c.psi; 2]) } else { (vec![0.0], vec![c.psi]) };
            let b = c.b;
            let (inst, stats) =
                build_extremal(params, c.mu, c.a, move |t| b.eval(t), pt, pv, delay, &grid, ExtremalOptions::default())?;
            let l = case_label(c);
            let mut reps = vec![verify_premise(&inst), bound_global(&inst)?];
            reps.extend(bound_limsup(&inst, 0.5 * t_end, e.decay_tol)?);
            reps.push(
                BoundReport::scalar("contraction", c.a / c.mu, stats.contraction, 1e-3)
                    .with_note(format!("{} sweeps", stats.sweeps)),
            );
            for r in &mut reps {
                r.name = format!("{}[{l}]", r.name);
            }
            let mut csv = Vec::new();
            inst.write_csv(&mut csv)?;
            Ok((reps, stats.sweeps as f64, csv))
        })
        .collect::<Result<_, LabError>>()?;
    let mut rec = RunRecord::new(cfg);
    for (k, (reps, sweeps, csv)) in results.into_iter().enumerate() {
        rec.reports.extend(reps);
        rec.value(format!("sweeps[{}]", case_label(&e.halanay[k])), sweeps);
        rec.artifacts.push((format!("halanay_{k}.csv"), csv));
    }
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_sweep_passes_with_no_reports() {
        let cfg = ExperimentConfig::from_toml_str(
            "[experiment]\nkind = \"relaxation_suite\"\nalphas = []\n",
        )
        .unwrap();
        let rec = run_suites(&cfg).unwrap();
        assert!(rec.reports.is_empty() && rec.passed());
    }

    #[test]
    fn single_point_relaxation_suite_passes() {
        let cfg = ExperimentConfig::from_toml_str(
            "[experiment]\nkind = \"relaxation_suite\"\nalphas = [0.5]\ngammas = [1.0]\nmus = [1.0, 5.0]\n",
        )
        .unwrap();
        let rec = run_suites(&cfg).unwrap();
        assert!(rec.passed(), "{}", rec.summary());
        // 2 cross-method + 2×6 properties + 1 monotonicity
        assert_eq!(rec.reports.len(), 15);
    }

    #[test]
    fn small_halanay_suite() {
        let cfg = ExperimentConfig::from_toml_str(
            "[experiment]\nkind = \"halanay_suite\"\nhalanay_steps = 2000\nhalanay = [{ mu = 5.0, a = 0.5, b = { kind = \"constant\", value = 0.5 } }]\n",
        )
        .unwrap();
        let rec = run_suites(&cfg).unwrap();
        assert!(rec.passed(), "{}", rec.summary());
        assert_eq!(rec.artifacts.len(), 1);
    }
}
