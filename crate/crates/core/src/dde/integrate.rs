use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DdeError, Envelope, History, ProblemSpec, Profile};
use crate::kernels::dot;
use crate::relaxation::TimeGrid;
use crate::report::BoundReport;
use crate::spectral::{
    cauchy_convolution, cauchy_convolution_fft, Field, FieldSeries, ResolventTable, SpectralError,
};

/// A computed mild solution: the input history followed by the march on `[0, T]`.
#[derive(Debug, Clone)]
pub struct MildTrajectory {
    pub history: History,
    pub grid: TimeGrid,
    pub states: FieldSeries,
    /// `f(tᵢ, u(tᵢ − ρ(tᵢ)))` at every node.
    pub forcing: FieldSeries,
    /// `tᵢ − ρ(tᵢ)` at every node.
    pub delayed: Vec<f64>,
    /// Picard sweeps spent on each node (0 for explicit steps).
    pub picard_iters: Vec<usize>,
    /// Last Picard increment on each node (0 for explicit steps).
    pub residuals: Vec<f64>,
}

impl MildTrajectory {
    pub fn state(&self, i: usize) -> Field {
        self.states.field(i)
    }

    /// `‖u(tᵢ)‖` on `[0, T]`.
    pub fn norms(&self) -> Vec<f64> {
        self.states.norms()
    }

    /// `u(s)` for any `s ∈ [−τ, T]`, linear between nodes.
    pub fn value_at(&self, s: f64, out: &mut [f64]) {
        if s <= 0.0 {
            self.history.eval_into(s, out);
            return;
        }
        let h = self.grid.nodes()[1];
        read_states(&self.states, h, self.states.len() - 1, s, out);
    }

    /// CSV `t,norm,c_1..c_N` over history and march.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.states.modes();
        write!(out, "t,norm")?;
        for k in 1..=n {
            write!(out, ",c_{k}")?;
        }
        writeln!(out)?;
        let hist = self.history.values();
        let mut row = |t: f64, c: &[f64]| -> std::io::Result<()> {
            write!(out, "{t:e},{:e}", dot(c, c).sqrt())?;
            for x in c {
                write!(out, ",{x:e}")?;
            }
            writeln!(out)
        };
        // the node at 0 belongs to the march
        for (i, &t) in self.history.times().iter().enumerate().filter(|(_, t)| **t < 0.0) {
            row(t, hist.node(i))?;
        }
        for (i, &t) in self.grid.nodes().iter().enumerate() {
            row(t, self.states.node(i))?;
        }
        Ok(())
    }
}

/// Linear interpolation of the march at `s ∈ (0, t_last]`.
fn read_states(states: &FieldSeries, h: f64, last: usize, s: f64, out: &mut [f64]) {
    let x = s / h;
    let j = (x.floor() as usize).min(last.saturating_sub(1));
    let th = (x - j as f64).clamp(0.0, 1.0);
    if last == 0 {
        out.copy_from_slice(states.node(0));
        return;
    }
    let (a, b) = (states.node(j), states.node(j + 1));
    for ((o, p), q) in out.iter_mut().zip(a).zip(b) {
        *o = p + th * (q - p);
    }
}

fn check_table(problem: &ProblemSpec, table: &ResolventTable) -> Result<(), DdeError> {
    problem.validate()?;
    if **table.basis() != *problem.basis {
        return Err(SpectralError::BasisMismatch.into());
    }
    if table.grid() != &problem.grid {
        return Err(SpectralError::GridMismatch("table and problem grids differ".into()).into());
    }
    if table.params() != problem.params {
        return Err(DdeError::InvalidProblem("table was built for different (alpha, gamma)".into()));
    }
    Ok(())
}

fn delayed_checked(problem: &ProblemSpec, t: f64) -> Result<f64, DdeError> {
    let tau = problem.delay.tau();
    let d = problem.delay.delayed_time(t);
    let eps = 1e-12 * t.abs().max(1.0);
    if !(d >= -tau - eps && d <= t + eps) {
        return Err(DdeError::DelayOutOfRange { t, delayed: d, tau });
    }
    Ok(d.min(t))
}

/// Node-by-node march of the mild-solution identity.
///
/// A delayed time at or before the previous node makes the step explicit; otherwise the
/// node is solved by plain Picard iteration on the last cell.
pub fn integrate(problem: &ProblemSpec, table: &ResolventTable) -> Result<MildTrajectory, DdeError> {
    check_table(problem, table)?;
    let grid = &problem.grid;
    let nodes = grid.nodes();
    let k_len = grid.len();
    let n = problem.basis.len();
    let h = grid.step().expect("validated uniform");
    let f = &problem.nonlinearity;
    let xi0 = problem.history.at_zero().to_vec();
    let diag: Vec<f64> = (0..n).map(|k| table.kernel(k).diagonal()).collect();

    let mut states = FieldSeries::zeros(problem.basis.clone(), k_len);
    let mut forcing = FieldSeries::zeros(problem.basis.clone(), k_len);
    let mut fcols = vec![vec![0.0; k_len]; n];
    let mut delayed = Vec::with_capacity(k_len);
    let mut iters = vec![0usize; k_len];
    let mut residuals = vec![0.0; k_len];

    let mut base = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut fv = vec![0.0; n];
    let mut u = vec![0.0; n];
    for i in 0..k_len {
        let t = nodes[i];
        let d = delayed_checked(problem, t)?;
        delayed.push(d);
        if i == 0 {
            base.copy_from_slice(&xi0);
        } else {
            for k in 0..n {
                base[k] = table.omega(k, i) * xi0[k] + table.kernel(k).history_at(i, &fcols[k]);
            }
        }
        let implicit = i > 0 && f.is_state_dependent() && d > nodes[i - 1];
        if !implicit {
            if f.is_state_dependent() {
                if d <= 0.0 {
                    problem.history.eval_into(d, &mut v);
                } else {
                    read_states(&states, h, i - 1, d, &mut v);
                }
            }
            f.eval_into(t, &v, &mut fv);
            if i == 0 {
                u.copy_from_slice(&base);
            } else {
                for k in 0..n {
                    u[k] = base[k] + diag[k] * fv[k];
                }
            }
        } else {
            let th = (d - nodes[i - 1]) / h;
            u.copy_from_slice(states.node(i - 1));
            let tol = problem.solver.picard_tol;
            let mut prev_inc = f64::NAN;
            let mut converged = false;
            for it in 1..=problem.solver.picard_max {
                let prev = states.node(i - 1);
                for k in 0..n {
                    v[k] = prev[k] + th * (u[k] - prev[k]);
                }
                f.eval_into(t, &v, &mut fv);
                let mut inc: f64 = 0.0;
                let mut scale: f64 = 1.0;
                for k in 0..n {
                    let new = base[k] + diag[k] * fv[k];
                    inc = inc.max((new - u[k]).abs());
                    scale = scale.max(new.abs());
                    u[k] = new;
                }
                iters[i] = it;
                residuals[i] = inc;
                if inc <= tol * scale {
                    converged = true;
                    break;
                }
                if it == problem.solver.picard_max {
                    return Err(DdeError::PicardNonConvergent {
                        node: i,
                        t,
                        increment: inc,
                        contraction: inc / prev_inc,
                    });
                }
                prev_inc = inc;
            }
            debug_assert!(converged);
            // forcing consistent with the accepted state
            for k in 0..n {
                v[k] = states.node(i - 1)[k] + th * (u[k] - states.node(i - 1)[k]);
            }
            f.eval_into(t, &v, &mut fv);
        }
        states.node_mut(i).copy_from_slice(&u);
        forcing.node_mut(i).copy_from_slice(&fv);
        for k in 0..n {
            fcols[k][i] = fv[k];
        }
    }
    Ok(MildTrajectory {
        history: problem.history.clone(),
        grid: grid.clone(),
        states,
        forcing,
        delayed,
        picard_iters: iters,
        residuals,
    })
}

/// Controls for the global fixed-point iteration `u ← S(·)ξ(0) + Q(f(·, u_ρ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalOptions {
    pub tol: f64,
    pub max_sweeps: usize,
    /// Evaluate `Q` by FFT instead of the direct rows.
    pub fft: bool,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_sweeps: 200, fft: true }
    }
}

/// Whole-trajectory Picard iteration (verification mode), starting from `initial` or
/// from `ξ(0)` held constant. Returns the trajectory and the number of sweeps.
pub fn integrate_global(
    problem: &ProblemSpec,
    table: &ResolventTable,
    initial: Option<&FieldSeries>,
    opts: GlobalOptions,
) -> Result<(MildTrajectory, usize), DdeError> {
    check_table(problem, table)?;
    let grid = &problem.grid;
    let nodes = grid.nodes();
    let k_len = grid.len();
    let n = problem.basis.len();
    let h = grid.step().expect("validated uniform");
    let xi0 = problem.history.at_zero().to_vec();
    let delayed: Vec<f64> =
        nodes.iter().map(|&t| delayed_checked(problem, t)).collect::<Result<_, _>>()?;

    let mut free = FieldSeries::zeros(problem.basis.clone(), k_len);
    for i in 0..k_len {
        for k in 0..n {
            free.node_mut(i)[k] = table.omega(k, i) * xi0[k];
        }
    }
    let mut u = match initial {
        Some(s) if s.len() == k_len => s.clone(),
        Some(_) => return Err(SpectralError::GridMismatch("initial guess length".into()).into()),
        None => {
            let mut s = FieldSeries::zeros(problem.basis.clone(), k_len);
            for i in 0..k_len {
                s.node_mut(i).copy_from_slice(&xi0);
            }
            s
        }
    };
    let mut forcing = FieldSeries::zeros(problem.basis.clone(), k_len);
    let mut v = vec![0.0; n];
    let mut sweeps = 0;
    let mut last_inc = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        for (i, &d) in delayed.iter().enumerate() {
            if d <= 0.0 {
                problem.history.eval_into(d, &mut v);
            } else {
                read_states(&u, h, k_len - 1, d, &mut v);
            }
            problem.nonlinearity.eval_into(nodes[i], &v, forcing.node_mut(i));
        }
        let q = if opts.fft {
            cauchy_convolution_fft(table, &forcing)?
        } else {
            cauchy_convolution(table, &forcing)?
        };
        let mut inc: f64 = 0.0;
        let mut scale: f64 = 1.0;
        let mut next = free.clone();
        for ((x, qv), old) in next.flat_mut().iter_mut().zip(q.flat()).zip(u.flat()) {
            *x += qv;
            inc = inc.max((*x - old).abs());
            scale = scale.max(x.abs());
        }
        u = next;
        last_inc = inc;
        if inc <= opts.tol * scale {
            break;
        }
    }
    if last_inc > opts.tol * u.flat().iter().fold(1.0f64, |m, x| m.max(x.abs())) {
        return Err(DdeError::PicardNonConvergent {
            node: k_len - 1,
            t: grid.t_end(),
            increment: last_inc,
            contraction: f64::NAN,
        });
    }
    // forcing consistent with the final iterate
    for (i, &d) in delayed.iter().enumerate() {
        if d <= 0.0 {
            problem.history.eval_into(d, &mut v);
        } else {
            read_states(&u, h, k_len - 1, d, &mut v);
        }
        problem.nonlinearity.eval_into(nodes[i], &v, forcing.node_mut(i));
    }
    Ok((
        MildTrajectory {
            history: problem.history.clone(),
            grid: grid.clone(),
            states: u,
            forcing,
            delayed,
            picard_iters: vec![sweeps; k_len],
            residuals: vec![last_inc; k_len],
        },
        sweeps,
    ))
}

fn forcing_mass(traj: &MildTrajectory, h: f64) -> f64 {
    let norms = traj.forcing.norms();
    norms.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
}

/// Recomputes `S(t)ξ(0) + Q(f(·, u_ρ))` on the 2×-refined grid from the stored path and
/// reports the largest node-wise discrepancy. Builds a fresh table on the refined grid,
/// so it costs about four marches.
///
/// The claimed side is `10·e·(‖ξ(0)‖ + ∫‖f‖)` with `e` the refined table's error
/// estimate: the size of discrepancy the `ω` error alone can explain.
pub fn residual_check(traj: &MildTrajectory, problem: &ProblemSpec) -> Result<BoundReport, DdeError> {
    problem.validate()?;
    let fine = problem.grid.refined();
    let table = ResolventTable::build(problem.params, problem.basis.clone(), &fine)?;
    let n = problem.basis.len();
    let mut g = FieldSeries::zeros(problem.basis.clone(), fine.len());
    let mut v = vec![0.0; n];
    for (m, &s) in fine.nodes().iter().enumerate() {
        let d = delayed_checked(problem, s)?;
        traj.value_at(d, &mut v);
        problem.nonlinearity.eval_into(s, &v, g.node_mut(m));
    }
    let q = cauchy_convolution(&table, &g)?;
    let xi0 = problem.history.at_zero();
    let mut worst: f64 = 0.0;
    for i in 0..traj.states.len() {
        let m = 2 * i;
        let mut acc = 0.0;
        for k in 0..n {
            let r = table.omega(k, m) * xi0[k] + q.node(m)[k];
            let e = r - traj.states.node(i)[k];
            acc += e * e;
        }
        worst = worst.max(acc.sqrt());
    }
    let h = problem.grid.step().unwrap();
    let xi_norm = dot(xi0, xi0).sqrt();
    let claimed = 10.0 * table.est_error() * (xi_norm + forcing_mass(traj, h))
        + 10.0 * problem.solver.picard_tol;
    Ok(BoundReport::scalar("mild_residual", claimed, worst, 0.0)
        .with_note(format!("max node discrepancy {worst:.3e} on the 2x-refined grid")))
}

/// Distance between the march and a global Picard solve started from a perturbed
/// guess; a numerical witness of uniqueness under F3.
pub fn uniqueness_probe(
    problem: &ProblemSpec,
    table: &ResolventTable,
    perturbation: f64,
    seed: u64,
) -> Result<BoundReport, DdeError> {
    if !matches!(problem.nonlinearity.envelope, Envelope::F3 | Envelope::F4) {
        return Err(DdeError::MissingMetadata(format!(
            "uniqueness probe needs a Lipschitz (F3) nonlinearity, got {:?}",
            problem.nonlinearity.envelope
        )));
    }
    let a = integrate(problem, table)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut guess = a.states.clone();
    for x in guess.flat_mut() {
        *x += perturbation * rng.random_range(-1.0..1.0);
    }
    let opts = GlobalOptions { tol: problem.solver.picard_tol, ..GlobalOptions::default() };
    let (b, sweeps) = integrate_global(problem, table, Some(&guess), opts)?;
    let dist = a
        .states
        .flat()
        .chunks(a.states.modes())
        .zip(b.states.flat().chunks(b.states.modes()))
        .map(|(x, y)| {
            let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            dot(&d, &d).sqrt()
        })
        .fold(0.0, f64::max);
    let scale = a.norms().into_iter().fold(1.0f64, f64::max);
    Ok(BoundReport::scalar("uniqueness_distance", 10.0 * problem.solver.picard_tol * scale, dist, 0.0)
        .with_note(format!("global Picard from a guess perturbed by {perturbation}: {sweeps} sweeps")))
}

/// `sup_{[0,t]}‖u‖ ≤ ψ(t)` with `ψ(t) = ‖ξ‖∞ + ∫₀ᵗ p(1 + ‖ξ‖∞ + ψ)`, i.e.
/// `ψ = (1 + 2‖ξ‖∞)e^{P(t)} − 1 − ‖ξ‖∞` with `P = ∫p`.
pub fn apriori_bound_f2(traj: &MildTrajectory, problem: &ProblemSpec) -> Result<BoundReport, DdeError> {
    if problem.nonlinearity.envelope != Envelope::F2 {
        return Err(DdeError::MissingMetadata("a-priori bound needs F2 metadata".into()));
    }
    let a = problem.history.sup_norm();
    let p_int = |t: f64| match problem.nonlinearity.p {
        Profile::Zero => 0.0,
        Profile::Constant { value } => value.abs() * t,
        Profile::Exponential { amplitude, rate } => {
            if rate == 0.0 {
                amplitude.abs() * t
            } else {
                amplitude.abs() * (1.0 - (-rate * t).exp()) / rate
            }
        }
    };
    let mut running: f64 = 0.0;
    let mut claimed = Vec::new();
    let mut measured = Vec::new();
    for (&t, r) in problem.grid.nodes().iter().zip(traj.norms()) {
        running = running.max(r);
        claimed.push((1.0 + 2.0 * a) * p_int(t).exp() - 1.0 - a);
        measured.push(running);
    }
    Ok(BoundReport::series("apriori_psi_bound", claimed, measured, 1e-12 * (1.0 + a)))
}

/// `‖u(tᵢ)‖ ≤ ω(tᵢ,λ₁)‖ξ(0)‖ + Σⱼ W₁(i,j)‖f(tⱼ)‖`, the triangle inequality through the
/// same quadrature.
pub fn norm_chain_check(traj: &MildTrajectory, table: &ResolventTable) -> BoundReport {
    let xi0 = traj.history.at_zero();
    let xi_norm = dot(xi0, xi0).sqrt();
    let fnorms = traj.forcing.norms();
    let conv = table.kernel(0).apply(&fnorms);
    let claimed: Vec<f64> =
        conv.iter().enumerate().map(|(i, c)| table.omega(0, i) * xi_norm + c).collect();
    let scale = claimed.iter().fold(1.0f64, |m, x| m.max(*x));
    let h = table.step();
    let tol = 10.0 * table.row(0).est_error * (xi_norm + forcing_mass(traj, h)) + 1e-12 * scale;
    BoundReport::series("norm_chain", claimed, traj.norms(), tol)
}
