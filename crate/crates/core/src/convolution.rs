//! Laplace convolution `(k ∗ g)(tᵢ) = ∫₀^{tᵢ} k(tᵢ − s) g(s) ds` on a uniform grid, exact for
//! the product of the piecewise-linear interpolants of `k` and `g`.
//!
//! On the cell `[t_j, t_{j+1}]` both factors are linear, so
//!
//! ```text
//! ∫ = h/6 · (2 k_{i−j} g_j + k_{i−j} g_{j+1} + k_{i−j−1} g_j + 2 k_{i−j−1} g_{j+1})
//! ```
//!
//! and the weight of an interior sample `g_j` only depends on the lag `m = i − j`:
//! `c_m = h/6 · (k_{m−1} + 4k_m + k_{m+1})`. The two endpoints get one-sided weights.
//!
//! Two evaluation paths share these weights. [`ProductKernel::apply_at`] is the causal
//! O(i) row used by marching solvers (and, row by row, the O(K²) reference);
//! [`ProductKernel::apply_fft`] evaluates every node at once in O(K log K) for
//! fixed-point sweeps over a whole trajectory.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::kernels::dot;

/// Product-integration weights for one sampled kernel.
#[derive(Debug, Clone)]
pub struct ProductKernel {
    h: f64,
    samples: Vec<f64>,
    /// `c_rev[n − 1 − m] = c_m`, so a row is a contiguous slice.
    c_rev: Vec<f64>,
}

impl ProductKernel {
    /// `samples[m] = k(m·h)` for `m = 0..n`.
    pub fn new(h: f64, samples: &[f64]) -> Self {
        let n = samples.len();
        assert!(n >= 1, "kernel needs at least one sample");
        let mut c_rev = vec![0.0; n];
        for m in 1..n.saturating_sub(1) {
            c_rev[n - 1 - m] = h / 6.0 * (samples[m - 1] + 4.0 * samples[m] + samples[m + 1]);
        }
        Self { h, samples: samples.to_vec(), c_rev }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Weight of `g_j` in the value at node `i` (`j ≤ i`).
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let k = &self.samples;
        let h6 = self.h / 6.0;
        match (i, j) {
            (0, _) => 0.0,
            (_, 0) if i == 1 => h6 * (2.0 * k[1] + k[0]),
            (_, _) if j == i => h6 * (k[1] + 2.0 * k[0]),
            (_, 0) => h6 * (2.0 * k[i] + k[i - 1]),
            _ => h6 * (k[i - j - 1] + 4.0 * k[i - j] + k[i - j + 1]),
        }
    }

    /// Weight of the current node `g_i` in row `i ≥ 1`; the implicit part of a march.
    pub fn diagonal(&self) -> f64 {
        self.h / 6.0 * (self.samples[1] + 2.0 * self.samples[0])
    }

    /// The part of row `i` that only involves `g_0..g_{i−1}`.
    pub fn history_at(&self, i: usize, g: &[f64]) -> f64 {
        if i == 0 {
            return 0.0;
        }
        let n = self.samples.len();
        let k = &self.samples;
        let first = self.h / 6.0 * (2.0 * k[i] + k[i - 1]) * g[0];
        first + dot(&g[1..i], &self.c_rev[n - i..n - 1])
    }

    /// Row `i` of the convolution, `g` sampled at nodes `0..=i` (at least).
    pub fn apply_at(&self, i: usize, g: &[f64]) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.history_at(i, g) + self.diagonal() * g[i]
    }

    /// All rows by the direct O(K²) sum.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        assert!(g.len() <= self.samples.len(), "signal longer than kernel table");
        (0..g.len()).map(|i| self.apply_at(i, g)).collect()
    }

    /// All rows through one zero-padded FFT product.
    pub fn apply_fft(&self, g: &[f64]) -> Vec<f64> {
        let n = g.len();
        assert!(n <= self.samples.len(), "signal longer than kernel table");
        if n < 2 {
            return vec![0.0; n];
        }
        let len = (2 * n).next_power_of_two();
        let nk = self.samples.len();
        let mut a = vec![Complex::new(0.0, 0.0); len];
        let mut b = vec![Complex::new(0.0, 0.0); len];
        for m in 1..n {
            a[m].re = self.c_rev[nk - 1 - m];
        }
        for j in 1..n {
            b[j].re = g[j];
        }
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= *y;
        }
        inv.process(&mut a);
        let scale = 1.0 / len as f64;
        let k = &self.samples;
        let h6 = self.h / 6.0;
        let diag = self.diagonal();
        let mut out = vec![0.0; n];
        for i in 1..n {
            // interior lags 1..i−1 come from the FFT; the m = 0 lag of b is the current
            // node, excluded because a[0] = 0
            let interior = a[i].re * scale;
            out[i] = interior + h6 * (2.0 * k[i] + k[i - 1]) * g[0] + diag * g[i];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(h: f64, k: &[f64], g: &[f64], i: usize) -> f64 {
        // integrate the product of the two linear interpolants cell by cell with Simpson's
        // rule, which is exact for quadratics
        let mut s = 0.0;
        for j in 0..i {
            let kl = |x: f64| k[i - j] * (1.0 - x) + k[i - j - 1] * x;
            let gl = |x: f64| g[j] * (1.0 - x) + g[j + 1] * x;
            let f = |x: f64| kl(x) * gl(x);
            s += h / 6.0 * (f(0.0) + 4.0 * f(0.5) + f(1.0));
        }
        s
    }

    fn sample(n: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..n).map(f).collect()
    }

    #[test]
    fn rows_match_cellwise_integration() {
        let h = 0.1;
        let k = sample(30, |m| (-(m as f64) * h).exp() * (1.0 + (m as f64).sin() * 0.1));
        let g = sample(30, |j| (j as f64 * 0.3).cos());
        let pk = ProductKernel::new(h, &k);
        for i in 0..30 {
            let a = pk.apply_at(i, &g);
            let b = brute(h, &k, &g, i);
            assert!((a - b).abs() < 1e-13, "row {i}: {a} vs {b}");
            let by_weights: f64 = (0..=i).map(|j| pk.weight(i, j) * g[j]).sum();
            assert!((a - by_weights).abs() < 1e-13);
        }
    }

    #[test]
    fn fft_matches_direct() {
        let h = 0.05;
        let n = 700;
        let k = sample(n, |m| 1.0 / (1.0 + m as f64 * h));
        let g = sample(n, |j| (j as f64 * 0.01).sin() + 0.3);
        let pk = ProductKernel::new(h, &k);
        let direct = pk.apply(&g);
        let fast = pk.apply_fft(&g);
        let scale = direct.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn constant_kernel_is_trapezoid() {
        let h = 0.25;
        let pk = ProductKernel::new(h, &[1.0; 9]);
        let g: Vec<f64> = (0..9).map(|j| (j as f64 * h).powi(2)).collect();
        let trap: f64 = (0..8).map(|j| 0.5 * h * (g[j] + g[j + 1])).sum();
        assert!((pk.apply_at(8, &g) - trap).abs() < 1e-14);
    }

    #[test]
    fn zero_signal_gives_zero() {
        let pk = ProductKernel::new(0.1, &[1.0, 0.9, 0.8, 0.7]);
        assert!(pk.apply(&[0.0; 4]).iter().all(|&v| v == 0.0));
        assert!(pk.apply_fft(&[0.0; 4]).iter().all(|&v| v == 0.0));
    }
}
