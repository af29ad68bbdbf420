use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kernels::dot;
use crate::report::BoundReport;
use crate::spectral::{EigenBasis, Field, Transform};

/// Time profile `p(t)` of a growth envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    Constant { value: f64 },
    /// `amplitude · e^{−rate·t}`.
    Exponential { amplitude: f64, rate: f64 },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value,
            Profile::Exponential { amplitude, rate } => amplitude * (-rate * t).exp(),
        }
    }

    /// `‖p‖∞` over `t ≥ 0`.
    pub fn sup(&self) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Constant { value } => value.abs(),
            Profile::Exponential { amplitude, rate } => {
                if rate >= 0.0 {
                    amplitude.abs()
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// The growth function of an envelope: `G(r)` for F1/F5, `κ(r)` for F3/F4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Growth {
    None,
    /// `G(r) = slope·r`, or `κ ≡ slope`.
    Linear { slope: f64 },
    /// `G(r) = coefficient·r^exponent`; as a Lipschitz modulus, `κ(r) = G′(r)`.
    Power { coefficient: f64, exponent: f64 },
}

impl Growth {
    pub fn g(&self, r: f64) -> f64 {
        match *self {
            Growth::None => 0.0,
            Growth::Linear { slope } => slope * r,
            Growth::Power { coefficient, exponent } => coefficient * r.powf(exponent),
        }
    }

    pub fn kappa(&self, r: f64) -> f64 {
        match *self {
            Growth::None => 0.0,
            Growth::Linear { slope } => slope,
            Growth::Power { coefficient, exponent } => coefficient * exponent * r.powf(exponent - 1.0),
        }
    }

    /// `ℓ = limsup_{r→0} G(r)/r`.
    pub fn ell(&self) -> f64 {
        match *self {
            Growth::None => 0.0,
            Growth::Linear { slope } => slope,
            Growth::Power { coefficient, exponent } => {
                if exponent > 1.0 {
                    0.0
                } else if exponent == 1.0 {
                    coefficient
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Which hypothesis the metadata claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// `‖f(t,v)‖ ≤ p(t) G(‖v‖)`.
    F1,
    /// `‖f(t,v)‖ ≤ p(t)(1 + ‖v‖)`.
    F2,
    /// `‖f(t,v₁) − f(t,v₂)‖ ≤ p(t) κ(r) ‖v₁ − v₂‖` on the `r`-ball, `f(·,0) = 0`.
    F3,
    /// As F3 with `ℓ = limsup_{r→0} κ(r)` entering the stability constant.
    F4,
    /// F1 plus the half-interval tail condition on `ω(·,λ₁) ∗ p`.
    F5,
    /// No growth claim (manufactured forcing).
    Unspecified,
}

type EvalFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// `f(t, v)` acting on coefficient vectors, with its growth metadata.
#[derive(Clone)]
pub struct NonlinearitySpec {
    name: String,
    eval: Arc<EvalFn>,
    pub p: Profile,
    pub envelope: Envelope,
    pub growth: Growth,
    state_dependent: bool,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearitySpec")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("envelope", &self.envelope)
            .field("growth", &self.growth)
            .field("state_dependent", &self.state_dependent)
            .finish()
    }
}

impl NonlinearitySpec {
    /// Arbitrary evaluator `eval(t, v, out)` writing `f(t, v)` into `out`.
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        p: Profile,
        envelope: Envelope,
        growth: Growth,
        state_dependent: bool,
    ) -> Self {
        Self { name: name.into(), eval: Arc::new(eval), p, envelope, growth, state_dependent }
    }

    pub fn zero() -> Self {
        Self::custom("zero", |_, _, out| out.fill(0.0), Profile::Zero, Envelope::F3, Growth::None, false)
    }

    /// `f(t, v) = c·v`: F3 with `p ≡ 1`, `κ ≡ |c|`.
    pub fn linear(c: f64) -> Self {
        Self::custom(
            format!("linear(c={c})"),
            move |_, v, out| {
                for (o, x) in out.iter_mut().zip(v) {
                    *o = c * x;
                }
            },
            Profile::Constant { value: 1.0 },
            Envelope::F3,
            Growth::Linear { slope: c.abs() },
            true,
        )
    }

    /// `f(t, v) = p₀·w` with `‖w‖ = 1`: F2 with `p ≡ p₀`.
    pub fn forcing(p0: f64, w: &Field) -> Self {
        let norm = w.norm();
        let dir: Vec<f64> = w.coeffs().iter().map(|c| c / norm).collect();
        Self::custom(
            format!("forcing(p0={p0})"),
            move |_, _, out| {
                for (o, d) in out.iter_mut().zip(&dir) {
                    *o = p0 * d;
                }
            },
            Profile::Constant { value: p0.abs() },
            Envelope::F2,
            Growth::None,
            false,
        )
    }

    /// `f(t, v) = p(t)‖v‖v`: F5 with `G(r) = r²`.
    pub fn quadratic(p: Profile) -> Self {
        Self::custom(
            "quadratic",
            move |t, v, out| {
                let s = p.eval(t) * dot(v, v).sqrt();
                for (o, x) in out.iter_mut().zip(v) {
                    *o = s * x;
                }
            },
            p,
            Envelope::F5,
            Growth::Power { coefficient: 1.0, exponent: 2.0 },
            true,
        )
    }

    /// State-independent forcing `f(t, ·) = F(t)`.
    pub fn prescribed(
        name: impl Into<String>,
        forcing: impl Fn(f64, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self::custom(
            name,
            move |t, _, out| forcing(t, out),
            Profile::Zero,
            Envelope::Unspecified,
            Growth::None,
            false,
        )
    }

    /// A rule acting pointwise in `x`, applied as project ∘ rule ∘ synthesize.
    pub fn pointwise(
        name: impl Into<String>,
        transform: Transform,
        rule: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        p: Profile,
        envelope: Envelope,
        growth: Growth,
    ) -> Self {
        let basis = transform.basis().clone();
        Self::custom(
            name,
            move |t, v, out| {
                let field = Field::new(basis.clone(), v.to_vec()).expect("coefficient length");
                let mut values = transform.synthesize(&field).expect("same basis");
                for u in values.iter_mut() {
                    *u = rule(t, *u);
                }
                out.copy_from_slice(transform.project(&values).expect("mesh size").coeffs());
            },
            p,
            envelope,
            growth,
            true,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_state_dependent(&self) -> bool {
        self.state_dependent
    }

    pub fn eval_into(&self, t: f64, v: &[f64], out: &mut [f64]) {
        (self.eval)(t, v, out)
    }

    pub fn eval(&self, t: f64, v: &Field) -> Field {
        let mut out = vec![0.0; v.coeffs().len()];
        self.eval_into(t, v.coeffs(), &mut out);
        Field::new(v.basis().clone(), out).expect("same length")
    }

    /// `ℓ` of the declared envelope; for F3/F4 `G(r) = κ(r)·r` is used since `f(·,0) = 0`.
    pub fn ell(&self) -> f64 {
        self.growth.ell()
    }

    /// `G(r)` usable in the smallness-radius construction, if the envelope provides one.
    pub fn growth_g(&self, r: f64) -> Option<f64> {
        match self.envelope {
            Envelope::F1 | Envelope::F5 => Some(self.growth.g(r)),
            Envelope::F3 | Envelope::F4 => Some(self.growth.kappa(r) * r),
            Envelope::F2 | Envelope::Unspecified => None,
        }
    }

    /// Checks the declared envelope on `probes` random states with norms up to `r_max` at
    /// random times in `[0, t_max]`. The margin is `min(bound − measured)`.
    pub fn check_metadata(
        &self,
        basis: &EigenBasis,
        r_max: f64,
        t_max: f64,
        probes: usize,
        seed: u64,
    ) -> BoundReport {
        let name = format!("envelope_{:?}({})", self.envelope, self.name);
        if self.envelope == Envelope::Unspecified {
            return BoundReport::skipped(name, "no growth hypothesis declared");
        }
        let n = basis.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let random_state = |rng: &mut ChaCha8Rng, radius: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dot(&v, &v).sqrt().max(f64::MIN_POSITIVE);
            let target = radius * rng.random_range(0.0..=1.0f64);
            v.iter_mut().for_each(|x| *x *= target / norm);
            v
        };
        let (mut claimed, mut measured) = (Vec::new(), Vec::new());
        let mut f1 = vec![0.0; n];
        let mut f2 = vec![0.0; n];
        for _ in 0..probes {
            let t = rng.random_range(0.0..=t_max);
            let p = self.p.eval(t);
            match self.envelope {
                Envelope::F1 | Envelope::F5 | Envelope::F2 => {
                    let v = random_state(&mut rng, r_max);
                    self.eval_into(t, &v, &mut f1);
                    let r = dot(&v, &v).sqrt();
                    let bound = if self.envelope == Envelope::F2 { p * (1.0 + r) } else { p * self.growth.g(r) };
                    claimed.push(bound);
                    measured.push(dot(&f1, &f1).sqrt());
                }
                Envelope::F3 | Envelope::F4 => {
                    let v1 = random_state(&mut rng, r_max);
                    let v2 = random_state(&mut rng, r_max);
                    self.eval_into(t, &v1, &mut f1);
                    self.eval_into(t, &v2, &mut f2);
                    let diff: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a - b).collect();
                    let dv: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a - b).collect();
                    claimed.push(p * self.growth.kappa(r_max) * dot(&dv, &dv).sqrt());
                    measured.push(dot(&diff, &diff).sqrt());
                    // f(·, 0) = 0
                    self.eval_into(t, &vec![0.0; n], &mut f1);
                    claimed.push(0.0);
                    measured.push(dot(&f1, &f1).sqrt());
                }
                Envelope::Unspecified => unreachable!(),
            }
        }
        let scale = claimed.iter().chain(&measured).fold(1.0f64, |m, x| m.max(x.abs()));
        BoundReport::series(name, claimed, measured, 1e-12 * scale)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::spectral::{Domain, Mesh};

    fn basis(n: usize) -> Arc<EigenBasis> {
        Arc::new(EigenBasis::new(Domain::Interval { length: PI }, n).unwrap())
    }

    #[test]
    fn builtin_metadata_is_consistent() {
        let b = basis(6);
        let w = Field::new(b.clone(), vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.2]).unwrap();
        for spec in [
            NonlinearitySpec::zero(),
            NonlinearitySpec::linear(0.5),
            NonlinearitySpec::linear(-2.0),
            NonlinearitySpec::forcing(0.5, &w),
            NonlinearitySpec::quadratic(Profile::Exponential { amplitude: 1.0, rate: 1.0 }),
        ] {
            let r = spec.check_metadata(&b, 3.0, 5.0, 200, 1);
            assert!(r.pass, "{r}");
        }
    }

    #[test]
    fn wrong_metadata_is_caught() {
        let b = basis(4);
        let mut spec = NonlinearitySpec::linear(1.0);
        spec.growth = Growth::Linear { slope: 0.5 };
        assert!(!spec.check_metadata(&b, 1.0, 1.0, 50, 2).pass);
    }

    #[test]
    fn ell_values() {
        assert_eq!(Growth::Power { coefficient: 1.0, exponent: 2.0 }.ell(), 0.0);
        assert_eq!(Growth::Linear { slope: 0.5 }.ell(), 0.5);
        assert_eq!(NonlinearitySpec::linear(0.5).growth_g(2.0), Some(1.0));
        assert_eq!(NonlinearitySpec::forcing(0.5, &Field::mode(basis(2), 0)).growth_g(1.0), None);
    }

    #[test]
    fn forcing_has_norm_p0() {
        let b = basis(3);
        let w = Field::new(b.clone(), vec![3.0, 4.0, 0.0]).unwrap();
        let f = NonlinearitySpec::forcing(0.5, &w).eval(0.0, &Field::zeros(b));
        assert!((f.norm() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pointwise_cube_matches_quadrature() {
        let b = basis(8);
        let t = Transform::new(b.clone(), &Mesh::uniform(b.domain(), 128).unwrap()).unwrap();
        let f = NonlinearitySpec::pointwise(
            "cube",
            t,
            |_, u| u * u * u,
            Profile::Constant { value: 1.0 },
            Envelope::F1,
            Growth::Power { coefficient: 1.0, exponent: 3.0 },
        );
        // φ₁³ = (2/π)^{3/2} sin³x = (2/π)^{3/2}(3 sin x − sin 3x)/4
        let out = f.eval(0.0, &Field::mode(b.clone(), 0));
        let s = (2.0 / PI).powf(1.5) / 4.0 * (PI / 2.0).sqrt();
        assert!((out.coeffs()[0] - 3.0 * s).abs() < 1e-10);
        assert!((out.coeffs()[2] + s).abs() < 1e-10);
        assert!(out.coeffs()[1].abs() < 1e-10);
    }
}
