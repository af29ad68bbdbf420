use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::same_basis;
use super::{Domain, EigenBasis, Field, FieldSeries, SpectralError};
use crate::convolution::ProductKernel;
use crate::relaxation::{
    omega_volterra_batch, FracParams, Method, RelaxationSamples, TimeGrid, VolterraOptions,
};
use crate::report::BoundReport;

/// `ω(tᵢ, λₙ)` for every mode on one uniform grid, with the product-integration weights
/// of each row ready for convolutions.
#[derive(Debug, Clone)]
pub struct ResolventTable {
    basis: Arc<EigenBasis>,
    params: FracParams,
    grid: TimeGrid,
    rows: Vec<RelaxationSamples>,
    kernels: Vec<ProductKernel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    alpha: f64,
    gamma: f64,
    domain: Domain,
    modes: usize,
    lambdas: Vec<f64>,
    step: f64,
    nodes: usize,
    est_error: Vec<f64>,
}

impl ResolventTable {
    /// One Volterra solve per distinct eigenvalue with the cheap coarse-grid error
    /// estimate.
    pub fn build(
        params: FracParams,
        basis: Arc<EigenBasis>,
        grid: &TimeGrid,
    ) -> Result<Self, SpectralError> {
        Self::build_with(params, basis, grid, VolterraOptions::coarsen())
    }

    pub fn build_with(
        params: FracParams,
        basis: Arc<EigenBasis>,
        grid: &TimeGrid,
        opts: VolterraOptions,
    ) -> Result<Self, SpectralError> {
        if !grid.is_uniform() {
            return Err(SpectralError::GridMismatch("resolvent tables need a uniform grid".into()));
        }
        let mut distinct: Vec<f64> = basis.lambdas().to_vec();
        distinct.dedup();
        let solved = omega_volterra_batch(params, &distinct, grid, opts)?;
        let rows: Vec<RelaxationSamples> = basis
            .lambdas()
            .iter()
            .map(|l| {
                let j = distinct.partition_point(|d| d < l);
                solved[j].clone()
            })
            .collect();
        Self::from_rows(params, basis, grid.clone(), rows)
    }

    fn from_rows(
        params: FracParams,
        basis: Arc<EigenBasis>,
        grid: TimeGrid,
        rows: Vec<RelaxationSamples>,
    ) -> Result<Self, SpectralError> {
        let h = grid.step().ok_or_else(|| SpectralError::GridMismatch("non-uniform grid".into()))?;
        let kernels = rows.iter().map(|r| ProductKernel::new(h, &r.values)).collect();
        Ok(Self { basis, params, grid, rows, kernels })
    }

    pub fn basis(&self) -> &Arc<EigenBasis> {
        &self.basis
    }

    pub fn params(&self) -> FracParams {
        self.params
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn step(&self) -> f64 {
        self.kernels[0].step()
    }

    /// Number of time nodes.
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn row(&self, k: usize) -> &RelaxationSamples {
        &self.rows[k]
    }

    pub fn kernel(&self, k: usize) -> &ProductKernel {
        &self.kernels[k]
    }

    pub fn omega(&self, k: usize, i: usize) -> f64 {
        self.rows[k].values[i]
    }

    /// Largest per-mode error estimate.
    pub fn est_error(&self) -> f64 {
        self.rows.iter().map(|r| r.est_error).fold(0.0, f64::max)
    }

    /// The `λ₁` row dominates every other row entrywise.
    pub fn check_dominance(&self) -> BoundReport {
        let first = &self.rows[0].values;
        let mut claimed = Vec::new();
        let mut measured = Vec::new();
        for r in &self.rows[1..] {
            claimed.extend_from_slice(first);
            measured.extend_from_slice(&r.values);
        }
        BoundReport::series("lambda1_row_dominates", claimed, measured, 10.0 * self.est_error())
    }

    /// Upper bound on `ω(tᵢ, λ)` for every truncated mode `λ ≥ λ_N`, from
    /// `λω(t, λ) ≤ (t + g_{2−α}(t))^{-1}`.
    pub fn tail_bound(&self, i: usize) -> f64 {
        let t = self.grid.nodes()[i];
        if t == 0.0 {
            return 1.0;
        }
        let lam = *self.basis.lambdas().last().unwrap();
        (1.0 / (lam * (t + self.params.g_two_minus_alpha(t)))).min(1.0)
    }

    /// `table.csv` (header `t,omega_1..omega_N`) and `table.json` (α, γ, domain, λ, grid,
    /// per-mode error estimates) in `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), SpectralError> {
        fs::create_dir_all(dir)?;
        let header = Header {
            alpha: self.params.alpha,
            gamma: self.params.gamma,
            domain: self.basis.domain(),
            modes: self.basis.len(),
            lambdas: self.basis.lambdas().to_vec(),
            step: self.step(),
            nodes: self.len(),
            est_error: self.rows.iter().map(|r| r.est_error).collect(),
        };
        let json = serde_json::to_string_pretty(&header)
            .map_err(|e| SpectralError::Format(e.to_string()))?;
        fs::write(dir.join("table.json"), json)?;
        let mut out = BufWriter::new(fs::File::create(dir.join("table.csv"))?);
        write!(out, "t")?;
        for k in 1..=self.basis.len() {
            write!(out, ",omega_{k}")?;
        }
        writeln!(out)?;
        for (i, t) in self.grid.nodes().iter().enumerate() {
            write!(out, "{t:e}")?;
            for r in &self.rows {
                write!(out, ",{:e}", r.values[i])?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, SpectralError> {
        let header: Header = serde_json::from_str(&fs::read_to_string(dir.join("table.json"))?)
            .map_err(|e| SpectralError::Format(e.to_string()))?;
        let params = FracParams { alpha: header.alpha, gamma: header.gamma };
        params.validate()?;
        let basis = Arc::new(EigenBasis::new(header.domain, header.modes)?);
        if basis.lambdas() != header.lambdas.as_slice() {
            return Err(SpectralError::Format("stored eigenvalues differ from the closed form".into()));
        }
        let reader = BufReader::new(fs::File::open(dir.join("table.csv"))?);
        let mut nodes = Vec::with_capacity(header.nodes);
        let mut cols = vec![Vec::with_capacity(header.nodes); header.modes];
        for (ln, line) in reader.lines().enumerate().skip(1) {
            let line = line?;
            let mut it = line.split(',').map(str::parse::<f64>);
            let mut next = || -> Result<f64, SpectralError> {
                it.next()
                    .ok_or_else(|| SpectralError::Format(format!("short row at line {}", ln + 1)))?
                    .map_err(|e| SpectralError::Format(format!("line {}: {e}", ln + 1)))
            };
            nodes.push(next()?);
            for c in cols.iter_mut() {
                c.push(next()?);
            }
        }
        if nodes.len() != header.nodes {
            return Err(SpectralError::Format(format!(
                "expected {} rows, found {}",
                header.nodes,
                nodes.len()
            )));
        }
        let grid = TimeGrid::from_nodes(nodes)?;
        let rows = cols
            .into_iter()
            .zip(basis.lambdas())
            .zip(&header.est_error)
            .map(|((values, &mu), &est_error)| RelaxationSamples {
                mu,
                grid: grid.clone(),
                values,
                method: Method::Volterra,
                est_error,
            })
            .collect();
        Self::from_rows(params, basis, grid, rows)
    }

    fn check_series(&self, g: &FieldSeries) -> Result<(), SpectralError> {
        if !same_basis(&self.basis, g.basis()) {
            return Err(SpectralError::BasisMismatch);
        }
        if g.len() != self.len() {
            return Err(SpectralError::GridMismatch(format!(
                "series has {} nodes, table has {}",
                g.len(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// `S(tᵢ)v`: coefficient `n` multiplied by `ω(tᵢ, λₙ)`.
pub fn apply_resolvent(table: &ResolventTable, i: usize, v: &Field) -> Result<Field, SpectralError> {
    if !same_basis(table.basis(), v.basis()) {
        return Err(SpectralError::BasisMismatch);
    }
    if i >= table.len() {
        return Err(SpectralError::IndexOutOfRange { index: i, len: table.len() });
    }
    let coeffs = v.coeffs().iter().enumerate().map(|(k, c)| table.omega(k, i) * c).collect();
    Field::new(v.basis().clone(), coeffs)
}

/// `Q(g)(tᵢ) = ∫₀^{tᵢ} S(tᵢ − s) g(s) ds`, mode by mode with the direct O(K²) rows.
///
/// Each mode uses exactly the quadrature of [`crate::relaxation::scalar_inhomogeneous`].
pub fn cauchy_convolution(table: &ResolventTable, g: &FieldSeries) -> Result<FieldSeries, SpectralError> {
    convolve(table, g, |k, col| table.kernel(k).apply(col))
}

/// Same as [`cauchy_convolution`] through one FFT product per mode, O(N·K log K).
///
/// Agrees with the direct rows to rounding (relative `~1e-13`), not bitwise.
pub fn cauchy_convolution_fft(
    table: &ResolventTable,
    g: &FieldSeries,
) -> Result<FieldSeries, SpectralError> {
    convolve(table, g, |k, col| table.kernel(k).apply_fft(col))
}

fn convolve(
    table: &ResolventTable,
    g: &FieldSeries,
    op: impl Fn(usize, &[f64]) -> Vec<f64> + Sync,
) -> Result<FieldSeries, SpectralError> {
    table.check_series(g)?;
    let cols: Vec<Vec<f64>> = (0..g.modes())
        .into_par_iter()
        .map(|k| {
            let col = g.column(k);
            if col.iter().all(|&x| x == 0.0) {
                vec![0.0; col.len()]
            } else {
                op(k, &col)
            }
        })
        .collect();
    let mut out = FieldSeries::zeros(g.basis().clone(), g.len());
    for (k, c) in cols.iter().enumerate() {
        out.set_column(k, c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::relaxation::scalar_inhomogeneous;

    fn table(n: usize, steps: usize) -> ResolventTable {
        let basis = Arc::new(EigenBasis::new(Domain::Interval { length: PI }, n).unwrap());
        let grid = TimeGrid::uniform(2.0, steps).unwrap();
        ResolventTable::build(FracParams::new(0.5, 1.0).unwrap(), basis, &grid).unwrap()
    }

    #[test]
    fn time_zero_is_identity() {
        let t = table(4, 40);
        let v = Field::new(t.basis().clone(), vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(apply_resolvent(&t, 0, &v).unwrap(), v);
    }

    #[test]
    fn resolvent_norm_is_bounded_by_first_mode() {
        let t = table(6, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let v = Field::new(t.basis().clone(), (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap();
            let i = rng.random_range(0..t.len());
            let sv = apply_resolvent(&t, i, &v).unwrap();
            assert!(sv.norm() <= t.omega(0, i) * v.norm() * (1.0 + 1e-14));
            assert!(sv.norm() <= v.norm() * (1.0 + 1e-14));
        }
        assert!(t.check_dominance().pass);
    }

    #[test]
    fn single_mode_output_is_the_table_entry() {
        let t = table(5, 30);
        let v = Field::mode(t.basis().clone(), 3);
        for i in [0, 7, 30] {
            assert_eq!(apply_resolvent(&t, i, &v).unwrap().coeffs()[3], t.omega(3, i));
        }
    }

    #[test]
    fn cauchy_matches_scalar_route_bitwise() {
        let t = table(4, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut g = FieldSeries::zeros(t.basis().clone(), t.len());
        let col: Vec<f64> = (0..t.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        g.set_column(2, &col);
        let q = cauchy_convolution(&t, &g).unwrap();
        let scalar = scalar_inhomogeneous(t.row(2), 0.0, &col).unwrap();
        assert_eq!(q.column(2), scalar);
        assert!(q.column(0).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_forcing_respects_integral_bound() {
        let t = table(3, 200);
        let mut g = FieldSeries::zeros(t.basis().clone(), t.len());
        g.set_column(1, &vec![0.7; t.len()]);
        let q = cauchy_convolution(&t, &g).unwrap();
        let lam = t.basis().lambdas()[1];
        for (i, v) in q.column(1).iter().enumerate() {
            let bound = 0.7 / lam * (1.0 - t.omega(1, i));
            assert!(*v <= bound + 10.0 * t.row(1).est_error, "node {i}");
        }
    }

    #[test]
    fn fft_route_agrees() {
        let t = table(3, 300);
        let mut g = FieldSeries::zeros(t.basis().clone(), t.len());
        for k in 0..3 {
            g.set_column(k, &(0..t.len()).map(|i| ((i * (k + 1)) as f64 * 0.01).sin()).collect::<Vec<_>>());
        }
        let a = cauchy_convolution(&t, &g).unwrap();
        let b = cauchy_convolution_fft(&t, &g).unwrap();
        for (x, y) in a.flat().iter().zip(b.flat()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_forcing_and_mismatch() {
        let t = table(3, 20);
        let g = FieldSeries::zeros(t.basis().clone(), t.len());
        assert!(cauchy_convolution(&t, &g).unwrap().flat().iter().all(|&x| x == 0.0));
        let short = FieldSeries::zeros(t.basis().clone(), 5);
        assert!(matches!(cauchy_convolution(&t, &short), Err(SpectralError::GridMismatch(_))));
    }

    #[test]
    fn duplicate_eigenvalues_share_rows() {
        let basis = Arc::new(EigenBasis::new(Domain::Rectangle { lx: PI, ly: PI }, 4).unwrap());
        let grid = TimeGrid::uniform(1.0, 20).unwrap();
        let t = ResolventTable::build(FracParams::new(0.5, 1.0).unwrap(), basis, &grid).unwrap();
        assert_eq!(t.row(1).values, t.row(2).values);
        assert_eq!(t.row(1).mu, 5.0);
    }

    #[test]
    fn save_load_roundtrip_is_exact() {
        let t = table(3, 25);
        let dir = tempfile::tempdir().unwrap();
        t.save(dir.path()).unwrap();
        let back = ResolventTable::load(dir.path()).unwrap();
        assert_eq!(back.grid(), t.grid());
        for k in 0..3 {
            assert_eq!(back.row(k).values, t.row(k).values);
            assert_eq!(back.row(k).est_error, t.row(k).est_error);
        }
    }

    #[test]
    fn tail_bound_decreases() {
        let t = table(8, 100);
        assert_eq!(t.tail_bound(0), 1.0);
        assert!(t.tail_bound(100) < t.tail_bound(10));
        assert!(t.tail_bound(100) >= t.omega(7, 100));
    }
}
