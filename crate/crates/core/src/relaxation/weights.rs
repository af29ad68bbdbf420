//! Product-integration moments of the weakly singular kernel `u^{-α}` against the two
//! hat functions of one cell.
//!
//! A cell covers distances `u ∈ [a, a + h]` from the evaluation time. With `x = (u - a)/h`
//! the *far* node (largest `u`) carries the hat `x` and the *near* node carries `1 - x`.
//! For `h ≪ a` the closed forms cancel catastrophically, so that regime uses the binomial
//! series of `(1 + r x)^{-α}` in `r = h/a`.

const SERIES_RADIUS: f64 = 0.5;

/// `(∫ u^{-α} x du, ∫ u^{-α} (1 - x) du)` over `u ∈ [a, a + h]`.
#[inline]
pub(crate) fn cell_moments(alpha: f64, a: f64, h: f64) -> (f64, f64) {
    debug_assert!(a >= 0.0 && h > 0.0);
    if a == 0.0 {
        let s = h.powf(1.0 - alpha);
        return (s / (2.0 - alpha), s / ((1.0 - alpha) * (2.0 - alpha)));
    }
    let r = h / a;
    if r < SERIES_RADIUS {
        let (j1, j01) = series_moments(alpha, r);
        let scale = h * a.powf(-alpha);
        (scale * j1, scale * j01)
    } else {
        let b = a + h;
        let i0 = (b.powf(1.0 - alpha) - a.powf(1.0 - alpha)) / (1.0 - alpha);
        let i1 = (b.powf(2.0 - alpha) - a.powf(2.0 - alpha)) / (2.0 - alpha);
        ((i1 - a * i0) / h, (b * i0 - i1) / h)
    }
}

/// `J1 = ∫₀¹ x (1+rx)^{-α} dx` and `J0 - J1 = ∫₀¹ (1-x)(1+rx)^{-α} dx` for `0 < r < 1/2`.
#[inline]
fn series_moments(alpha: f64, r: f64) -> (f64, f64) {
    let mut coeff = 1.0; // binom(-α, k) r^k
    let mut j1 = 0.5;
    let mut j01 = 0.5;
    for k in 1..80 {
        let kf = k as f64;
        coeff *= (-alpha - (kf - 1.0)) / kf * r;
        let t1 = coeff / (kf + 2.0);
        j1 += t1;
        j01 += t1 / (kf + 1.0);
        if t1.abs() < 1e-17 * j01 {
            break;
        }
    }
    (j1, j01)
}

/// Far/near moments on a uniform grid of step `h` for cells whose near node sits `k`
/// steps away, `k = 0..count`.
pub(crate) fn uniform_moments(alpha: f64, h: f64, count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut far = Vec::with_capacity(count);
    let mut near = Vec::with_capacity(count);
    for k in 0..count {
        let (f, n) = cell_moments(alpha, k as f64 * h, h);
        far.push(f);
        near.push(n);
    }
    (far, near)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss-Legendre on a smooth cell, used as an independent oracle.
    fn gauss_moments(alpha: f64, a: f64, h: f64) -> (f64, f64) {
        const X: [f64; 8] = [
            -0.960_289_856_497_536_2,
            -0.796_666_477_413_626_7,
            -0.525_532_409_916_329,
            -0.183_434_642_495_649_8,
            0.183_434_642_495_649_8,
            0.525_532_409_916_329,
            0.796_666_477_413_626_7,
            0.960_289_856_497_536_2,
        ];
        const W: [f64; 8] = [
            0.101_228_536_290_376_26,
            0.222_381_034_453_374_47,
            0.313_706_645_877_887_3,
            0.362_683_783_378_362,
            0.362_683_783_378_362,
            0.313_706_645_877_887_3,
            0.222_381_034_453_374_47,
            0.101_228_536_290_376_26,
        ];
        let panels = 64;
        let (mut f, mut n) = (0.0, 0.0);
        for p in 0..panels {
            let x0 = p as f64 / panels as f64;
            let x1 = (p + 1) as f64 / panels as f64;
            for (xi, wi) in X.iter().zip(W) {
                let x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * xi;
                let w = 0.5 * (x1 - x0) * wi * h;
                let k = (a + h * x).powf(-alpha);
                f += w * k * x;
                n += w * k * (1.0 - x);
            }
        }
        (f, n)
    }

    #[test]
    fn moments_match_quadrature_on_both_branches() {
        for &alpha in &[0.1, 0.25, 0.5, 0.75, 0.9] {
            for &(a, h) in &[(1.0, 0.3), (1.0, 0.7), (2.0, 1.0), (1e3, 1.0), (0.01, 1e-5)] {
                let (f, n) = cell_moments(alpha, a, h);
                let (fq, nq) = gauss_moments(alpha, a, h);
                assert!((f - fq).abs() <= 1e-13 * fq, "far {alpha} {a} {h}: {f} vs {fq}");
                assert!((n - nq).abs() <= 1e-13 * nq, "near {alpha} {a} {h}: {n} vs {nq}");
            }
        }
    }

    #[test]
    fn moments_sum_to_kernel_integral() {
        for &alpha in &[0.25, 0.5, 0.75] {
            for &(a, h) in &[(0.0, 0.5), (1e-3, 1.0), (0.4, 1.0), (10.0, 0.01), (1e6, 1e-3)] {
                let (f, n) = cell_moments(alpha, a, h);
                // ((a+h)^{1-α} - a^{1-α})/(1-α) without cancellation
                let exact = if a == 0.0 {
                    h.powf(1.0 - alpha) / (1.0 - alpha)
                } else {
                    a.powf(1.0 - alpha) * ((1.0 - alpha) * (h / a).ln_1p()).exp_m1() / (1.0 - alpha)
                };
                let rel = ((f + n) - exact).abs() / exact;
                assert!(rel < 1e-13, "alpha {alpha} a {a} h {h}: rel {rel}");
            }
        }
    }
}
