use super::{RelaxationError, RelaxationSamples};
use crate::convolution::ProductKernel;

/// `v(tᵢ) = ω(tᵢ, μ) v₀ + (ω(·, μ) ∗ g)(tᵢ)`: the solution of `v′ + μ(1 + γ∂ᵗᵅ)v = g`,
/// `v(0) = v₀`, with `g` given at the grid nodes and linear in between.
///
/// The convolution reuses `samples` (uniform grid only), so a caller holding a resolvent
/// table gets exactly the same quadrature as the spectral Cauchy operator.
pub fn scalar_inhomogeneous(
    samples: &RelaxationSamples,
    v0: f64,
    g: &[f64],
) -> Result<Vec<f64>, RelaxationError> {
    let h = samples.grid.step().ok_or(RelaxationError::NonUniformGrid)?;
    if g.len() != samples.values.len() {
        return Err(RelaxationError::GridMismatch(format!(
            "forcing has {} samples, grid has {} nodes",
            g.len(),
            samples.values.len()
        )));
    }
    let kernel = ProductKernel::new(h, &samples.values);
    Ok(samples
        .values
        .iter()
        .enumerate()
        .map(|(i, w)| w * v0 + kernel.apply_at(i, g))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxation::{omega_volterra_with, FracParams, TimeGrid, VolterraOptions};

    fn samples(mu: f64, t_end: f64, steps: usize) -> RelaxationSamples {
        let p = FracParams::new(0.5, 1.0).unwrap();
        let grid = TimeGrid::uniform(t_end, steps).unwrap();
        omega_volterra_with(p, mu, &grid, VolterraOptions::coarsen()).unwrap()
    }

    #[test]
    fn homogeneous_case_scales_omega() {
        let s = samples(2.0, 3.0, 60);
        let v = scalar_inhomogeneous(&s, 1.7, &vec![0.0; 61]).unwrap();
        for (a, w) in v.iter().zip(&s.values) {
            assert_eq!(*a, 1.7 * w);
        }
    }

    #[test]
    fn mu_zero_keeps_initial_value() {
        let s = samples(0.0, 1.0, 10);
        let v = scalar_inhomogeneous(&s, 1.0, &[0.0; 11]).unwrap();
        assert!(v.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn constant_forcing_stays_below_one_minus_omega() {
        let mu = 2.0;
        let s = samples(mu, 20.0, 2000);
        let v = scalar_inhomogeneous(&s, 0.0, &vec![mu; 2001]).unwrap();
        let tol = s.tolerance();
        for (a, w) in v.iter().zip(&s.values) {
            assert!(*a <= 1.0 - w + tol, "{a} vs {}", 1.0 - w);
        }
        // the approach to 1 is algebraic when gamma > 0
        assert!(1.0 - v[2000] > 1e-2);
    }

    #[test]
    fn constant_forcing_is_exact_complement_without_damping() {
        let mu = 2.0;
        let p = FracParams::exponential_oracle(0.5).unwrap();
        let grid = TimeGrid::uniform(10.0, 2000).unwrap();
        let s = omega_volterra_with(p, mu, &grid, VolterraOptions::coarsen()).unwrap();
        let v = scalar_inhomogeneous(&s, 0.0, &vec![mu; 2001]).unwrap();
        for (a, t) in v.iter().zip(grid.nodes()) {
            assert!((a - (1.0 - (-mu * t).exp())).abs() < 1e-4);
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let s = samples(1.0, 1.0, 10);
        assert!(matches!(
            scalar_inhomogeneous(&s, 0.0, &[0.0; 5]),
            Err(RelaxationError::GridMismatch(_))
        ));
    }

    #[test]
    fn non_uniform_grid_is_rejected() {
        let p = FracParams::new(0.5, 1.0).unwrap();
        let grid = TimeGrid::graded(1.0, 8, 2.0).unwrap();
        let s = omega_volterra_with(p, 1.0, &grid, VolterraOptions::coarsen()).unwrap();
        assert_eq!(scalar_inhomogeneous(&s, 0.0, &[0.0; 9]), Err(RelaxationError::NonUniformGrid));
    }
}
