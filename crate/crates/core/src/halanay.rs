//! Halanay-type inequality for the relaxation kernel.
//!
//! If a continuous `v ≥ 0` with `v = ψ` on `[−τ, 0]` satisfies
//!
//! ```text
//! v(t) ≤ ω(t,μ)v₀ + ∫₀ᵗ ω(t−s,μ) [a·sup_{[s−ρ(s), s]} v + b(s)] ds,   0 < a < μ,
//! ```
//!
//! with `b ≥ 0` nondecreasing, then
//!
//! ```text
//! v(t) ≤ μ/(μ−a)·[v₀ + (ω ∗ b)(t)] + sup ψ,
//! ```
//!
//! and `v → 0` when `b = 0`. Everything here works on a uniform grid with `v` and `b`
//! piecewise linear, so the window sup and the premise integral are evaluated exactly
//! for the sampled functions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::convolution::ProductKernel;
use crate::dde::DelaySpec;
use crate::relaxation::{
    omega_volterra_with, FracParams, RelaxationError, RelaxationSamples, TimeGrid, VolterraOptions,
};
use crate::report::BoundReport;

#[derive(Debug, Error)]
pub enum HalanayError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("hypothesis 0 < a < mu fails: a = {a}, mu = {mu}")]
    RateOrder { a: f64, mu: f64 },
    #[error("premise does not hold (margin {margin:.3e}); the bound is not asserted")]
    PremiseFails { margin: f64 },
    #[error("tail window [{tail_start}, {t_end}] contains no node")]
    EmptyTail { tail_start: f64, t_end: f64 },
    #[error("premise iteration diverged after {sweeps} sweeps (contraction {contraction:.3})")]
    Divergence { sweeps: usize, contraction: f64 },
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed instance file: {0}")]
    Format(String),
}

/// One candidate `v` together with the data of the inequality.
#[derive(Debug, Clone)]
pub struct HalanayInstance {
    params: FracParams,
    mu: f64,
    a: f64,
    delay: DelaySpec,
    psi_times: Vec<f64>,
    psi: Vec<f64>,
    b: Vec<f64>,
    v: Vec<f64>,
    omega: RelaxationSamples,
    kernel: ProductKernel,
}

impl HalanayInstance {
    /// `psi` sampled at ascending `psi_times` ending at 0; `b` and `v` sampled on the
    /// uniform `grid`. `a ≥ μ` is accepted here; the bound checks refuse it.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: FracParams,
        mu: f64,
        a: f64,
        delay: DelaySpec,
        psi_times: Vec<f64>,
        psi: Vec<f64>,
        grid: &TimeGrid,
        b: Vec<f64>,
        v: Vec<f64>,
    ) -> Result<Self, HalanayError> {
        let omega = omega_volterra_with(params, mu, grid, VolterraOptions::coarsen())?;
        Self::from_omega(params, omega, a, delay, psi_times, psi, b, v)
    }

    /// As [`HalanayInstance::new`] with `ω(·, μ)` supplied (`μ = omega.mu`), e.g. a row
    /// of a resolvent table.
    #[allow(clippy::too_many_arguments)]
    pub fn from_omega(
        params: FracParams,
        omega: RelaxationSamples,
        a: f64,
        delay: DelaySpec,
        psi_times: Vec<f64>,
        psi: Vec<f64>,
        b: Vec<f64>,
        v: Vec<f64>,
    ) -> Result<Self, HalanayError> {
        let mu = omega.mu;
        let bad = |m: &str| Err(HalanayError::Invalid(m.into()));
        let grid = &omega.grid;
        let Some(h) = grid.step() else {
            return bad("the grid must be uniform");
        };
        if !(mu > 0.0) || !(a >= 0.0) || !mu.is_finite() || !a.is_finite() {
            return bad("need mu > 0 and a >= 0");
        }
        delay.validate().map_err(|e| HalanayError::Invalid(e.to_string()))?;
        if b.len() != grid.len() || v.len() != grid.len() {
            return bad("b and v must be sampled on the grid");
        }
        if psi_times.is_empty()
            || psi_times.len() != psi.len()
            || *psi_times.last().unwrap() != 0.0
            || psi_times.windows(2).any(|w| !(w[1] > w[0]))
        {
            return bad("psi times must be strictly increasing and end at 0");
        }
        if delay.tau() > 0.0 && psi_times[0] > -delay.tau() * (1.0 - 1e-12) {
            return bad("psi must cover [-tau, 0]");
        }
        if psi.iter().chain(&v).chain(&b).any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return bad("psi, b and v must be finite and nonnegative");
        }
        if b.windows(2).any(|w| w[1] < w[0]) {
            return bad("b must be nondecreasing");
        }
        let v0 = *psi.last().unwrap();
        if (v[0] - v0).abs() > 1e-12 * v0.max(1.0) {
            return bad("v(0) must equal psi(0)");
        }
        for (i, &t) in grid.nodes().iter().enumerate() {
            let d = delay.delayed_time(t);
            if !(d <= t * (1.0 + 1e-12) + 1e-12 && d >= psi_times[0] - 1e-12 * t.max(1.0)) {
                return Err(HalanayError::Invalid(format!("delayed time {d} at node {i} leaves [-tau, t]")));
            }
        }
        let kernel = ProductKernel::new(h, &omega.values);
        Ok(Self { params, mu, a, delay, psi_times, psi, b, v, omega, kernel })
    }

    pub fn params(&self) -> FracParams {
        self.params
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn delay(&self) -> &DelaySpec {
        &self.delay
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.omega.grid
    }

    pub fn psi_times(&self) -> &[f64] {
        &self.psi_times
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn v0(&self) -> f64 {
        *self.psi.last().unwrap()
    }

    pub fn psi_sup(&self) -> f64 {
        self.psi.iter().copied().fold(0.0, f64::max)
    }

    /// `ω(·, μ)` on the instance grid.
    pub fn omega(&self) -> &RelaxationSamples {
        &self.omega
    }

    /// Same data with `v` replaced.
    pub fn with_v(&self, v: Vec<f64>) -> Result<Self, HalanayError> {
        Self::from_omega(
            self.params,
            self.omega.clone(),
            self.a,
            self.delay.clone(),
            self.psi_times.clone(),
            self.psi.clone(),
            self.b.clone(),
            v,
        )
    }

    /// Multiplies `ψ`, `b` and `v` by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, HalanayError> {
        let s = |x: &[f64]| x.iter().map(|y| c * y).collect::<Vec<_>>();
        Self::from_omega(
            self.params,
            self.omega.clone(),
            self.a,
            self.delay.clone(),
            self.psi_times.clone(),
            s(&self.psi),
            s(&self.b),
            s(&self.v),
        )
    }

    /// `sup_{[tᵢ−ρ(tᵢ), tᵢ]} v` at every node.
    pub fn window_sup(&self) -> Vec<f64> {
        window_sup(&self.v, self.grid(), &self.delay, &self.psi_times, &self.psi)
    }

    /// Right side of the premise at every node.
    fn premise_rhs(&self, fft: bool) -> Vec<f64> {
        let w = self.window_sup();
        let g: Vec<f64> = w.iter().zip(&self.b).map(|(s, b)| self.a * s + b).collect();
        let conv = if fft { self.kernel.apply_fft(&g) } else { self.kernel.apply(&g) };
        let v0 = self.v0();
        conv.iter().zip(&self.omega.values).map(|(c, o)| o * v0 + c).collect()
    }

    fn tolerance(&self, claimed: &[f64]) -> f64 {
        1e-9 * claimed.iter().copied().fold(1.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,v,b")?;
        for ((t, v), b) in self.grid().nodes().iter().zip(&self.v).zip(&self.b) {
            writeln!(out, "{t:e},{v:e},{b:e}")?;
        }
        Ok(())
    }

    /// Writes `instance.json` (scalars, delay, `ψ`) and `instance.csv` (`t,v,b`).
    pub fn save(&self, dir: &Path) -> Result<(), HalanayError> {
        fs::create_dir_all(dir)?;
        let header = Header {
            alpha: self.params.alpha,
            gamma: self.params.gamma,
            mu: self.mu,
            a: self.a,
            tau: self.delay.tau(),
            delay: self.delay.clone(),
            step: self.grid().step().unwrap(),
            t_end: self.grid().t_end(),
            nodes: self.grid().len(),
            psi_times: self.psi_times.clone(),
            psi: self.psi.clone(),
        };
        let json = serde_json::to_string_pretty(&header).map_err(|e| HalanayError::Format(e.to_string()))?;
        fs::write(dir.join("instance.json"), json)?;
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        fs::write(dir.join("instance.csv"), csv)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, HalanayError> {
        let fmt = |m: String| HalanayError::Format(m);
        let header: Header = serde_json::from_str(&fs::read_to_string(dir.join("instance.json"))?)
            .map_err(|e| fmt(e.to_string()))?;
        let text = fs::read_to_string(dir.join("instance.csv"))?;
        let mut lines = text.lines();
        if lines.next() != Some("t,v,b") {
            return Err(fmt("instance.csv must start with t,v,b".into()));
        }
        let (mut v, mut b) = (Vec::new(), Vec::new());
        for line in lines {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| fmt(format!("{e}: {line}"))))
                .collect::<Result<_, _>>()?;
            if cols.len() != 3 {
                return Err(fmt(format!("expected 3 columns: {line}")));
            }
            v.push(cols[1]);
            b.push(cols[2]);
        }
        if v.len() != header.nodes {
            return Err(fmt(format!("{} rows, header says {}", v.len(), header.nodes)));
        }
        let grid = TimeGrid::uniform(header.t_end, header.nodes - 1)?;
        let params = FracParams { alpha: header.alpha, gamma: header.gamma };
        Self::new(params, header.mu, header.a, header.delay, header.psi_times, header.psi, &grid, b, v)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    alpha: f64,
    gamma: f64,
    mu: f64,
    a: f64,
    tau: f64,
    delay: DelaySpec,
    step: f64,
    t_end: f64,
    nodes: usize,
    psi_times: Vec<f64>,
    psi: Vec<f64>,
}

/// Range maximum by a sparse table.
struct RangeMax {
    levels: Vec<Vec<f64>>,
}

impl RangeMax {
    fn new(v: &[f64]) -> Self {
        let mut levels = vec![v.to_vec()];
        let mut w = 1;
        while 2 * w <= v.len() {
            let prev = levels.last().unwrap();
            let next: Vec<f64> = (0..=v.len() - 2 * w).map(|i| prev[i].max(prev[i + w])).collect();
            levels.push(next);
            w *= 2;
        }
        Self { levels }
    }

    /// Max over `lo..=hi`.
    fn query(&self, lo: usize, hi: usize) -> f64 {
        let k = (usize::BITS - 1 - (hi - lo + 1).leading_zeros()) as usize;
        let row = &self.levels[k];
        row[lo].max(row[hi + 1 - (1 << k)])
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[xs.len() - 1] {
        return ys[ys.len() - 1];
    }
    let j = xs.partition_point(|&s| s <= x) - 1;
    let th = (x - xs[j]) / (xs[j + 1] - xs[j]);
    ys[j] + th * (ys[j + 1] - ys[j])
}

/// Exact window maximum of piecewise-linear `v` (grid) spliced to `ψ` (history nodes).
fn window_sup(v: &[f64], grid: &TimeGrid, delay: &DelaySpec, psi_times: &[f64], psi: &[f64]) -> Vec<f64> {
    let h = grid.step().expect("uniform grid");
    let table = RangeMax::new(v);
    let nodes = grid.nodes();
    nodes
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let d = delay.delayed_time(t).min(t);
            let mut m = v[i];
            if d < 0.0 {
                m = m.max(interp(psi_times, psi, d));
                let first = psi_times.partition_point(|&s| s <= d);
                for &p in &psi[first..] {
                    m = m.max(p);
                }
                m.max(table.query(0, i))
            } else {
                let x = d / h;
                let j = (x.floor() as usize).min(i);
                let next = j + 1;
                let th = x - j as f64;
                if next <= i {
                    m = m.max(v[j] + th * (v[next] - v[j]));
                    m.max(table.query(next, i))
                } else {
                    m.max(v[j])
                }
            }
        })
        .collect()
}

/// `v(t) ≤ ω(t,μ)v₀ + ∫₀ᵗ ω(t−s,μ)[a·sup v + b(s)] ds` at every node.
pub fn verify_premise(inst: &HalanayInstance) -> BoundReport {
    let claimed = inst.premise_rhs(false);
    let tol = inst.tolerance(&claimed);
    let mut r = BoundReport::series("halanay_premise", claimed, inst.v.clone(), tol);
    if inst.a >= inst.mu {
        r = r.with_note(format!("a = {} >= mu = {}: no conclusion follows", inst.a, inst.mu));
    }
    r
}

fn require_premise(inst: &HalanayInstance) -> Result<(), HalanayError> {
    if !(inst.a < inst.mu) {
        return Err(HalanayError::RateOrder { a: inst.a, mu: inst.mu });
    }
    let p = verify_premise(inst);
    if !p.pass {
        return Err(HalanayError::PremiseFails { margin: p.margin });
    }
    Ok(())
}

/// `v(t) ≤ μ/(μ−a)·[v₀ + (ω ∗ b)(t)] + sup ψ` node-wise; refuses unless the premise holds.
pub fn bound_global(inst: &HalanayInstance) -> Result<BoundReport, HalanayError> {
    require_premise(inst)?;
    let c = inst.mu / (inst.mu - inst.a);
    let wb = inst.kernel.apply(&inst.b);
    let (v0, sup_psi) = (inst.v0(), inst.psi_sup());
    let claimed: Vec<f64> = wb.iter().map(|x| c * (v0 + x) + sup_psi).collect();
    let tol = inst.tolerance(&claimed);
    Ok(BoundReport::series("halanay_global", claimed, inst.v.clone(), tol))
}

/// Finite-horizon stand-in for `limsup v ≤ μ/(μ−a)·sup(ω ∗ b)`: the maximum of `v` on
/// `[tail_start, T]` against that level plus the slack
/// `(μ/(μ−a))²·(v₀ + sup ψ)·ω(tail_start − ρ̄, μ)`, `ρ̄` the largest delay on the tail.
/// The level uses `sup(ω ∗ b)` over the horizon only. With `b ≡ 0` a second report checks
/// `v(T) ≤ decay_tol·sup ψ`.
pub fn bound_limsup(
    inst: &HalanayInstance,
    tail_start: f64,
    decay_tol: f64,
) -> Result<Vec<BoundReport>, HalanayError> {
    require_premise(inst)?;
    let nodes = inst.grid().nodes();
    let first = nodes.partition_point(|&t| t < tail_start);
    let t_end = inst.grid().t_end();
    if first >= nodes.len() || tail_start <= 0.0 {
        return Err(HalanayError::EmptyTail { tail_start, t_end });
    }
    let c = inst.mu / (inst.mu - inst.a);
    let sup_wb = inst.kernel.apply(&inst.b).into_iter().fold(0.0, f64::max);
    // longest look-back seen from the tail window
    let reach = nodes[first..]
        .iter()
        .map(|&t| t - inst.delay.delayed_time(t))
        .fold(0.0, f64::max);
    let slack = c * c * (inst.v0() + inst.psi_sup()) * inst.omega.interpolate(tail_start - reach);
    let tail_max = inst.v[first..].iter().copied().fold(0.0, f64::max);
    let level = c * sup_wb;
    let mut out = vec![BoundReport::scalar(
        "halanay_limsup",
        level + slack,
        tail_max,
        inst.tolerance(&[level + slack]),
    )
    .with_note(format!(
        "tail [{tail_start}, {t_end}]: level {level:.4e} + slack {slack:.3e}, tail max {tail_max:.4e}"
    ))];
    if inst.b.iter().all(|&x| x == 0.0) {
        let v_end = *inst.v.last().unwrap();
        let target = decay_tol * inst.psi_sup();
        out.push(
            BoundReport::scalar("halanay_decay", target, v_end, 0.0)
                .with_note(format!("v(T) = {v_end:.3e} at T = {t_end}, target {target:.1e}")),
        );
    }
    Ok(out)
}

/// Controls for [`build_extremal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremalOptions {
    /// Stop once the sup-norm increment is below `tol·max(1, sup v)`.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Run exactly this many sweeps instead.
    pub sweeps: Option<usize>,
}

impl Default for ExtremalOptions {
    fn default() -> Self {
        Self { tol: 1e-13, max_sweeps: 5000, sweeps: None }
    }
}

/// Iteration history of [`build_extremal`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalStats {
    pub sweeps: usize,
    /// Sup-norm distance between successive iterates.
    pub increments: Vec<f64>,
    /// Largest ratio of successive increments above the rounding floor.
    pub contraction: f64,
}

/// Iterates the premise map with equality from `v ≡ ψ(0)`, giving a `v` that meets the
/// premise with (near) equality.
#[allow(clippy::too_many_arguments)]
pub fn build_extremal(
    params: FracParams,
    mu: f64,
    a: f64,
    b: impl Fn(f64) -> f64,
    psi_times: Vec<f64>,
    psi: Vec<f64>,
    delay: DelaySpec,
    grid: &TimeGrid,
    opts: ExtremalOptions,
) -> Result<(HalanayInstance, ExtremalStats), HalanayError> {
    if !(a < mu) {
        return Err(HalanayError::RateOrder { a, mu });
    }
    let bs: Vec<f64> = grid.nodes().iter().map(|&t| b(t)).collect();
    let v0 = psi.last().copied().unwrap_or(0.0);
    let start = vec![v0; grid.len()];
    let mut inst = HalanayInstance::new(params, mu, a, delay, psi_times, psi, grid, bs, start)?;
    let mut increments = Vec::new();
    let mut contraction: f64 = 0.0;
    let mut growing = 0;
    let limit = opts.sweeps.unwrap_or(opts.max_sweeps);
    for k in 1..=limit {
        let mut next = inst.premise_rhs(true);
        // FFT rounding can dip below zero where the exact value is 0
        next.iter_mut().for_each(|x| *x = x.max(0.0));
        next[0] = v0;
        let scale = next.iter().copied().fold(1.0, f64::max);
        let inc = next.iter().zip(&inst.v).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        inst.v = next;
        if let Some(&prev) = increments.last() {
            if prev > 1e-12 * scale {
                let ratio: f64 = inc / prev;
                contraction = contraction.max(ratio);
                growing = if ratio > 1.0 { growing + 1 } else { 0 };
            }
        }
        increments.push(inc);
        if !inc.is_finite() || growing >= 10 {
            return Err(HalanayError::Divergence { sweeps: k, contraction });
        }
        if opts.sweeps.is_none() && inc <= opts.tol * scale {
            break;
        }
    }
    let sweeps = increments.len();
    Ok((inst, ExtremalStats { sweeps, increments, contraction }))
}
