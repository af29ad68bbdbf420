use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{random_field, ExperimentConfig, LabError, NormSeries, RunRecord};
use crate::dde::{
    integrate, norm_chain_check, omega_conv_p, smallness_radius, DelaySpec, Envelope, History,
    MildTrajectory, NonlinearitySpec, ProblemSpec, SmallnessOptions, SolverOptions,
};
use crate::halanay::{bound_global, bound_limsup, verify_premise, HalanayError, HalanayInstance};
use crate::relaxation::FracParams;
use crate::report::BoundReport;
use crate::spectral::{Field, ResolventTable};

struct Setup {
    params: FracParams,
    table: ResolventTable,
    nonlin: NonlinearitySpec,
    lambda1: f64,
}

fn setup(cfg: &ExperimentConfig) -> Result<Setup, LabError> {
    let params = cfg.params()?;
    let basis = cfg.basis()?;
    let lambda1 = basis.lambda1();
    let grid = cfg.time_grid(lambda1)?;
    let nonlin = cfg.nonlinearity(&basis)?;
    let table = ResolventTable::build(params, basis, &grid)?;
    Ok(Setup { params, table, nonlin, lambda1 })
}

fn problem(s: &Setup, delay: DelaySpec, xi: &Field) -> ProblemSpec {
    let tau = delay.tau();
    ProblemSpec {
        params: s.params,
        basis: s.table.basis().clone(),
        delay,
        history: History::constant(xi, tau),
        nonlinearity: s.nonlin.clone(),
        grid: s.table.grid().clone(),
        solver: SolverOptions::default(),
    }
}

fn trajectory_csv(traj: &MildTrajectory, coefficients: bool) -> Result<Vec<u8>, LabError> {
    let mut buf = Vec::new();
    if coefficients {
        traj.write_csv(&mut buf)?;
    } else {
        let mut s = String::from("t,norm\n");
        for (t, n) in traj.grid.nodes().iter().zip(traj.norms()) {
            writeln!(s, "{t:e},{n:e}").expect("string write");
        }
        buf = s.into_bytes();
    }
    Ok(buf)
}

fn psi_nodes(tau: f64, value: f64) -> (Vec<f64>, Vec<f64>) {
    if tau > 0.0 {
        (vec![-tau, 0.0], vec![value, value])
    } else {
        (vec![0.0], vec![value])
    }
}

/// Halanay instance built from a trajectory's norm series.
fn norm_instance(
    s: &Setup,
    traj: &MildTrajectory,
    delay: &DelaySpec,
    a: f64,
    b: f64,
) -> Result<HalanayInstance, LabError> {
    let xi = traj.history.sup_norm();
    let (pt, pv) = psi_nodes(delay.tau(), xi);
    let norms = traj.norms();
    Ok(HalanayInstance::from_omega(
        s.params,
        s.table.row(0).clone(),
        a,
        delay.clone(),
        pt,
        pv,
        vec![b; norms.len()],
        norms,
    )?)
}

/// A refused conclusion becomes a failing report instead of aborting the run.
fn conclusion(name: &str, r: Result<BoundReport, HalanayError>) -> Result<BoundReport, LabError> {
    match r {
        Ok(rep) => Ok(rep),
        Err(e @ (HalanayError::PremiseFails { .. } | HalanayError::RateOrder { .. })) => {
            Ok(BoundReport::scalar(name, 0.0, 1.0, 0.0).with_note(e.to_string()))
        }
        Err(e) => Err(e.into()),
    }
}

fn renamed(mut r: BoundReport, label: &str) -> BoundReport {
    r.name = format!("{}[{label}]", r.name);
    r
}

fn tail_start_index(nodes: &[f64]) -> usize {
    let t_end = *nodes.last().unwrap();
    nodes.partition_point(|&t| t < 0.5 * t_end)
}

/// Absorbing ball `R = ‖p‖∞/λ₁ + 1` under F2 with `‖p‖∞ < λ₁`: every initial size enters
/// and stays on `[T/2, T]`, and the tail respects `‖p‖∞/λ₁ + tail_slack`.
pub fn run_dissipativity(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let s = setup(cfg)?;
    if s.nonlin.envelope != Envelope::F2 {
        return Err(LabError::Hypothesis(format!(
            "dissipativity needs F2 metadata, {} declares {:?}",
            s.nonlin.name(),
            s.nonlin.envelope
        )));
    }
    let p_sup = s.nonlin.p.sup();
    if !(p_sup < s.lambda1) {
        return Err(LabError::Hypothesis(format!("‖p‖∞ = {p_sup} is not below λ₁ = {}", s.lambda1)));
    }
    let mut rec = RunRecord::new(cfg);
    rec.push(BoundReport::scalar("hypothesis_p_sup_below_lambda1", s.lambda1, p_sup, 0.0));
    let radius = p_sup / s.lambda1 + 1.0;
    let level = p_sup / s.lambda1;
    rec.value("absorbing_radius", radius);
    rec.value("limit_level", level);

    let delay = cfg.delay_spec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let xis: Vec<Field> = cfg
        .experiment
        .scales
        .iter()
        .map(|&sc| random_field(s.table.basis(), &mut rng, sc * radius))
        .collect();
    let trajs: Vec<MildTrajectory> = xis
        .par_iter()
        .map(|xi| integrate(&problem(&s, delay.clone(), xi), &s.table))
        .collect::<Result<_, _>>()?;

    let nodes = s.table.grid().nodes();
    let tail = tail_start_index(nodes);
    for (k, (sc, traj)) in cfg.experiment.scales.iter().zip(&trajs).enumerate() {
        let label = format!("scale={sc}");
        let norms = traj.norms();
        let tail_max = norms[tail..].iter().copied().fold(0.0, f64::max);
        let last_out = norms.iter().rposition(|&n| n > radius);
        let entry = match last_out {
            None => 0.0,
            Some(i) if i + 1 < nodes.len() => nodes[i + 1],
            Some(_) => f64::INFINITY,
        };
        rec.value(format!("entry_time[{label}]"), entry);
        rec.value(format!("tail_max[{label}]"), tail_max);
        rec.push(
            BoundReport::scalar(format!("absorbed_on_tail[{label}]"), radius, tail_max, 0.0)
                .with_note(format!("entry time {entry}")),
        );
        let direct = BoundReport::scalar(
            format!("tail_level[{label}]"),
            level + cfg.experiment.tail_slack,
            tail_max,
            0.0,
        );
        rec.push(renamed(norm_chain_check(traj, &s.table), &label));

        let inst = norm_instance(&s, traj, &delay, 0.0, p_sup)?;
        rec.push(renamed(verify_premise(&inst), &label));
        let limsup = match bound_limsup(&inst, 0.5 * nodes[nodes.len() - 1], cfg.experiment.decay_tol) {
            Ok(mut v) => renamed(v.remove(0), &label),
            Err(e) => conclusion(&format!("halanay_limsup[{label}]"), Err(e))?,
        };
        let verdict = |pass: bool| if pass { "passes" } else { "fails" };
        let agreement =
            BoundReport::scalar(format!("cross_route_agreement[{label}]"), 0.0, f64::from(u8::from(direct.pass != limsup.pass)), 0.0)
                .with_note(format!(
                    "direct tail check {}, Halanay limsup check {}",
                    verdict(direct.pass),
                    verdict(limsup.pass)
                ));
        rec.push(direct);
        rec.push(limsup);
        rec.push(agreement);
        rec.series.push(NormSeries::thinned(&label, nodes, &norms));
        rec.artifacts.push((format!("trajectory_{k}.csv"), trajectory_csv(traj, cfg.experiment.write_coefficients)?));
    }
    Ok(rec.finish())
}

/// Uniform bound `(λ₁/(λ₁ − ‖p‖∞(ℓ+θ)) + 1)‖ξ‖∞` and decay `‖u(T)‖ ≤ decay_tol·‖ξ‖∞`
/// across proportional delays `qt − τ`.
pub fn run_asymptotic_stability(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let s = setup(cfg)?;
    if !matches!(s.nonlin.envelope, Envelope::F3 | Envelope::F4) {
        return Err(LabError::Hypothesis(format!(
            "asymptotic stability needs F3/F4 metadata, {} declares {:?}",
            s.nonlin.name(),
            s.nonlin.envelope
        )));
    }
    let (p_sup, ell) = (s.nonlin.p.sup(), s.nonlin.ell());
    if !(p_sup * ell < s.lambda1) {
        return Err(LabError::Hypothesis(format!("‖p‖∞ℓ = {} is not below λ₁ = {}", p_sup * ell, s.lambda1)));
    }
    let sr = smallness_radius(&s.nonlin, &s.table, SmallnessOptions::default())?;
    let xi_norm = cfg.experiment.xi_norm;
    if xi_norm > sr.delta {
        return Err(LabError::Hypothesis(format!("‖ξ‖∞ = {xi_norm} exceeds the smallness radius δ = {}", sr.delta)));
    }
    let theta = crate::dde::default_slack(ell, sr.m);
    let denom = s.lambda1 - p_sup * (ell + theta);
    if !(denom > 0.0) {
        return Err(LabError::Hypothesis(format!("‖p‖∞(ℓ+θ) = {} is not below λ₁", p_sup * (ell + theta))));
    }
    let constant = s.lambda1 / denom + 1.0;
    let mut rec = RunRecord::new(cfg);
    rec.push(BoundReport::scalar("hypothesis_p_sup_ell_below_lambda1", s.lambda1, p_sup * ell, 0.0));
    rec.push(BoundReport::scalar("hypothesis_xi_within_delta", sr.delta, xi_norm, 0.0));
    rec.value("bound_constant", constant);
    rec.value("theta", theta);
    rec.value("delta", sr.delta);
    rec.value("eta", sr.eta);
    rec.value("m", sr.m);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let xi = random_field(s.table.basis(), &mut rng, xi_norm);
    let tau = cfg.delay.tau;
    let delays: Vec<DelaySpec> = cfg
        .experiment
        .q_values
        .iter()
        .map(|&q| DelaySpec::Proportional { q, tau })
        .collect();
    let trajs: Vec<MildTrajectory> = delays
        .par_iter()
        .map(|d| integrate(&problem(&s, d.clone(), &xi), &s.table))
        .collect::<Result<_, _>>()?;

    let nodes = s.table.grid().nodes();
    for (k, ((q, delay), traj)) in cfg.experiment.q_values.iter().zip(&delays).zip(&trajs).enumerate() {
        let label = format!("q={q}");
        let norms = traj.norms();
        let claimed = vec![constant * xi_norm; norms.len()];
        rec.push(BoundReport::series(format!("uniform_bound[{label}]"), claimed, norms.clone(), 1e-12));
        let end = *norms.last().unwrap();
        rec.push(
            BoundReport::scalar(format!("tail_decay[{label}]"), cfg.experiment.decay_tol * xi_norm, end, 0.0)
                .with_note(format!("‖u(T)‖/‖ξ‖∞ = {:.3e}", end / xi_norm)),
        );
        let inst = norm_instance(&s, traj, delay, p_sup * ell, 0.0)?;
        rec.push(renamed(verify_premise(&inst), &label));
        rec.push(renamed(conclusion(&format!("halanay_global[{label}]"), bound_global(&inst))?, &label));
        rec.value(format!("decay_ratio[{label}]"), end / xi_norm);
        rec.series.push(NormSeries::thinned(&label, nodes, &norms));
        rec.artifacts.push((format!("trajectory_{k}.csv"), trajectory_csv(traj, cfg.experiment.write_coefficients)?));
    }
    Ok(rec.finish())
}

/// `∫₀^{t/2} ω(t − s, λ₁) p(s) ds` at the even nodes, exact for piecewise-linear factors.
fn half_tail(table: &ResolventTable, p: &[f64]) -> Vec<(f64, f64)> {
    let w = &table.row(0).values;
    let h = table.step();
    let nodes = table.grid().nodes();
    (0..nodes.len())
        .step_by(2)
        .map(|i| {
            let m = i / 2;
            let mut acc = 0.0;
            for j in 0..m {
                let (ka, kb) = (w[i - j], w[i - j - 1]);
                acc += h / 6.0 * (2.0 * ka * p[j] + ka * p[j + 1] + kb * p[j] + 2.0 * kb * p[j + 1]);
            }
            (nodes[i], acc)
        })
        .collect()
}

/// Tail condition on `ω(·,λ₁) ∗ p`, invariance of `B_η` and equidecay of a family of
/// solutions started at `‖ξ‖∞ = δ/2`.
pub fn run_decay_family(cfg: &ExperimentConfig) -> Result<RunRecord, LabError> {
    let s = setup(cfg)?;
    if !matches!(s.nonlin.envelope, Envelope::F5 | Envelope::F1) {
        return Err(LabError::Hypothesis(format!(
            "decay family needs F5 metadata, {} declares {:?}",
            s.nonlin.name(),
            s.nonlin.envelope
        )));
    }
    let nodes = s.table.grid().nodes();
    let t_end = *nodes.last().unwrap();
    let tol = cfg.experiment.decay_tol;
    let mut rec = RunRecord::new(cfg);

    let p: Vec<f64> = nodes.iter().map(|&t| s.nonlin.p.eval(t)).collect();
    let tail = half_tail(&s.table, &p);
    let mut running = 0.0f64;
    let sup_after: Vec<(f64, f64)> = tail
        .iter()
        .rev()
        .map(|&(t, v)| {
            running = running.max(v);
            (t, running)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let late = sup_after.iter().find(|(t, _)| *t >= 0.5 * t_end).map_or(0.0, |x| x.1);
    rec.push(
        BoundReport::scalar("half_interval_tail", tol, late, 0.0)
            .with_note(format!("sup over t >= {} of the half-interval tail", 0.5 * t_end)),
    );
    let checkpoints: Vec<(f64, f64)> =
        (0..=6).rev().map(|j| t_end / f64::from(1u32 << j)).map(|c| {
            let v = sup_after.iter().find(|(t, _)| *t >= c * (1.0 - 1e-12)).map_or(0.0, |x| x.1);
            (c, v)
        }).collect();
    rec.tables.insert("half_interval_tail".into(), checkpoints);

    let sr = smallness_radius(&s.nonlin, &s.table, SmallnessOptions::default())?;
    rec.value("delta", sr.delta);
    rec.value("eta", sr.eta);
    rec.value("delta0", sr.delta0);
    rec.value("zeta", sr.zeta);
    rec.value("m", sr.m);
    rec.push(BoundReport::scalar("delta_positive", sr.delta, 0.0, 0.0));
    rec.push(BoundReport::scalar("hypothesis_slack_times_m_below_one", 1.0, sr.m * (sr.ell + sr.zeta), 0.0));
    let wp = omega_conv_p(&s.table, &s.nonlin.p);
    rec.value("sup_omega_conv_p", wp.iter().copied().fold(0.0, f64::max));

    let xi_norm = 0.5 * sr.delta;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let xis: Vec<Field> = (0..cfg.experiment.family_size)
        .map(|_| random_field(s.table.basis(), &mut rng, xi_norm))
        .collect();
    let delay = cfg.delay_spec();
    let trajs: Vec<MildTrajectory> = xis
        .par_iter()
        .map(|xi| integrate(&problem(&s, delay.clone(), xi), &s.table))
        .collect::<Result<_, _>>()?;

    let mut all_norms = Vec::with_capacity(trajs.len());
    for (k, traj) in trajs.iter().enumerate() {
        let norms = traj.norms();
        let label = format!("member={k}");
        rec.push(BoundReport::scalar(format!("stays_in_ball[{label}]"), sr.eta, norms.iter().copied().fold(0.0, f64::max), 0.0));
        rec.push(BoundReport::scalar(format!("decay[{label}]"), tol * xi_norm, *norms.last().unwrap(), 0.0));
        all_norms.push(norms);
    }
    // sup over the family of sup_{t ≥ T_j} ‖u‖
    let mut family_tail = vec![0.0f64; nodes.len()];
    for norms in &all_norms {
        let mut run = 0.0f64;
        for i in (0..nodes.len()).rev() {
            run = run.max(norms[i]);
            family_tail[i] = family_tail[i].max(run);
        }
    }
    let equi: Vec<(f64, f64)> = (0..=6)
        .rev()
        .map(|j| t_end / f64::from(1u32 << j))
        .map(|c| (c, family_tail[nodes.partition_point(|&t| t < c * (1.0 - 1e-12))]))
        .collect();
    let claimed: Vec<f64> = equi.windows(2).map(|w| w[0].1).collect();
    let measured: Vec<f64> = equi.windows(2).map(|w| w[1].1).collect();
    rec.push(BoundReport::series("equidecay_nonincreasing", claimed, measured, 0.0));
    let last = equi.last().unwrap().1;
    rec.push(
        BoundReport::scalar("equidecay_final", tol * xi_norm, last, 0.0)
            .with_note(format!("family sup over t >= T relative to ‖ξ‖∞: {:.3e}", last / xi_norm)),
    );
    rec.tables.insert("equidecay".into(), equi);

    let mut csv = String::from("t");
    for k in 0..all_norms.len() {
        write!(csv, ",norm_{k}").expect("string write");
    }
    csv.push('\n');
    for (i, t) in nodes.iter().enumerate() {
        write!(csv, "{t:e}").expect("string write");
        for n in &all_norms {
            write!(csv, ",{:e}", n[i]).expect("string write");
        }
        csv.push('\n');
    }
    rec.artifacts.push(("family_norms.csv".into(), csv.into_bytes()));
    let mut tail_csv = String::from("t,half_tail\n");
    for (t, v) in &tail {
        writeln!(tail_csv, "{t:e},{v:e}").expect("string write");
    }
    rec.artifacts.push(("half_interval_tail.csv".into(), tail_csv.into_bytes()));
    for (k, norms) in all_norms.iter().enumerate().take(4) {
        rec.series.push(NormSeries::thinned(format!("member={k}"), nodes, norms));
    }
    Ok(rec.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(text).unwrap()
    }

    #[test]
    fn half_tail_of_zero_profile_is_zero_and_bounded_by_omega() {
        let c = cfg("[experiment]\nkind = \"decay_family\"\n[nonlin]\nkind = \"quadratic\"\n[grid]\nh = 0.05\nT = 20.0\n[domain]\nkind = \"interval\"\nN = 2\n");
        let s = setup(&c).unwrap();
        let n = s.table.len();
        assert!(half_tail(&s.table, &vec![0.0; n]).iter().all(|x| x.1 == 0.0));
        let p: Vec<f64> = s.table.grid().nodes().iter().map(|t| (-t).exp()).collect();
        for (i, (t, v)) in half_tail(&s.table, &p).into_iter().enumerate() {
            // ∫₀^{t/2} ω(t−s)e^{−s} ds ≤ ω(t/2)
            assert!(v <= s.table.row(0).interpolate(t / 2.0) + 1e-9, "node {i}");
        }
    }

    #[test]
    fn small_dissipativity_run_passes() {
        let c = cfg("[experiment]\nkind = \"dissipativity\"\n[nonlin]\nkind = \"forcing\"\nparams = { p0 = 0.5 }\n[domain]\nkind = \"interval\"\nN = 4\n[grid]\nh = 0.1\nT = 100.0\n");
        let rec = run_dissipativity(&c).unwrap();
        assert!(rec.passed(), "{}", rec.summary());
        assert_eq!(rec.artifacts.len(), 4);
    }

    #[test]
    fn hypotheses_are_enforced() {
        let c = cfg("[experiment]\nkind = \"dissipativity\"\n[nonlin]\nkind = \"forcing\"\nparams = { p0 = 1.5 }\n[domain]\nkind = \"interval\"\nN = 2\n[grid]\nh = 0.5\nT = 5.0\n");
        assert!(matches!(run_dissipativity(&c), Err(LabError::Hypothesis(_))));
        let c = cfg("[experiment]\nkind = \"asymptotic_stability\"\n[nonlin]\nkind = \"forcing\"\n[domain]\nkind = \"interval\"\nN = 2\n[grid]\nh = 0.5\nT = 5.0\n");
        assert!(matches!(run_asymptotic_stability(&c), Err(LabError::Hypothesis(_))));
        let c = cfg("[experiment]\nkind = \"asymptotic_stability\"\nxi_norm = 1e3\n[nonlin]\nkind = \"linear\"\n[domain]\nkind = \"interval\"\nN = 2\n[grid]\nh = 0.5\nT = 5.0\n");
        assert!(matches!(run_asymptotic_stability(&c), Err(LabError::Hypothesis(_))));
    }

    #[test]
    fn zero_nonlinearity_stability_has_large_margin() {
        let c = cfg("[experiment]\nkind = \"asymptotic_stability\"\nq_values = [1.0]\n[nonlin]\nkind = \"zero\"\n[domain]\nkind = \"interval\"\nN = 4\n[grid]\nh = 0.1\nT = 20.0\n");
        let rec = run_asymptotic_stability(&c).unwrap();
        let ub = rec.reports.iter().find(|r| r.name.starts_with("uniform_bound")).unwrap();
        assert!(ub.pass && ub.margin >= 0.1 - 1e-12, "{ub}");
        let prem = rec.reports.iter().find(|r| r.name.starts_with("halanay_premise")).unwrap();
        assert!(prem.pass, "{prem}");
    }
}
