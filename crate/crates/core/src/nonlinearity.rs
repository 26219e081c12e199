//! The midpoint nonlinearity of the scheme, its Lipschitz truncation and
//! its spectral projection through oversampled quadrature.

use num_complex::Complex64;

use crate::error::{Result, SgpeError};
use crate::hermite::{HermiteBasis, SpectralState};

/// Ramp family applied to squared Sobolev norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutoffShape {
    /// C1 polynomial ramp from 1 at the level to 0 at twice the level.
    Smoothstep,
    /// Indicator of [0, level].
    Hard,
    /// No truncation.
    Off,
}

/// Truncation of the nonlinearity: a non-increasing [0,1]-valued factor of
/// the squared norm of index `norm_index`, equal to 1 below `level` and 0
/// beyond `2 * level`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffProfile {
    pub level: f64,
    pub norm_index: u32,
    pub shape: CutoffShape,
}

impl CutoffProfile {
    pub fn off() -> Self {
        Self {
            level: f64::INFINITY,
            norm_index: 1,
            shape: CutoffShape::Off,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shape != CutoffShape::Off && !(self.level > 0.0) {
            return Err(SgpeError::Config(format!(
                "cutoff level {} must be positive",
                self.level
            )));
        }
        Ok(())
    }

    /// The ramp value at squared-norm `x`.
    pub fn theta(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(SgpeError::Contract(format!(
                "cutoff evaluated at negative squared norm {x}"
            )));
        }
        match self.shape {
            CutoffShape::Off => Ok(1.0),
            CutoffShape::Hard => Ok(if x <= self.level { 1.0 } else { 0.0 }),
            CutoffShape::Smoothstep => {
                let s = (x / self.level - 1.0).clamp(0.0, 1.0);
                Ok(1.0 - s * s * (3.0 - 2.0 * s))
            }
        }
    }
}

/// Midpoint approximation of the cubic nonlinearity:
/// `g(u, v) = (|u|^2 + |v|^2)/2 * (u + v)/2`.
///
/// `g(u, u) = |u|^2 u`, `g` is symmetric, and `g(u, v) * conj(u + v)` is
/// real at every point, which is what makes the midpoint update conserve
/// the L2 norm.
pub fn g_pointwise(u: Complex64, v: Complex64) -> Complex64 {
    0.5 * (u.norm_sqr() + v.norm_sqr()) * (0.5 * (u + v))
}

/// Projects the (optionally truncated) nonlinearity onto the mode span via
/// an oversampled quadrature rule.
#[derive(Clone, Debug)]
pub struct NonlinearEvaluator {
    rule: HermiteBasis,
    profile: CutoffProfile,
}

impl NonlinearEvaluator {
    /// `oversample * k` quadrature nodes for a `k`-mode space.
    pub fn new(k: usize, oversample: usize, profile: CutoffProfile) -> Result<Self> {
        if oversample < 1 {
            return Err(SgpeError::Config(format!(
                "quadrature oversampling factor {oversample} must be >= 1"
            )));
        }
        profile.validate()?;
        let rule = HermiteBasis::with_nodes(k, k * oversample)?;
        Ok(Self { rule, profile })
    }

    pub fn profile(&self) -> &CutoffProfile {
        &self.profile
    }

    pub fn rule(&self) -> &HermiteBasis {
        &self.rule
    }

    /// Truncated midpoint nonlinearity
    /// `theta(|u|_k^2) theta(|v|_k^2) P_K g(u, v)`.
    pub fn g_l(&self, u: &SpectralState, v: &SpectralState) -> Result<SpectralState> {
        let k = self.rule.k_modes();
        if u.len() != k || v.len() != k {
            return Err(SgpeError::Contract(format!(
                "nonlinearity: state lengths {} and {} do not match {k} modes",
                u.len(),
                v.len()
            )));
        }
        let j = self.profile.norm_index;
        let damping = self.profile.theta(u.sigma_norm_sq(j))? * self.profile.theta(v.sigma_norm_sq(j))?;
        if damping == 0.0 {
            return Ok(SpectralState::zeros(k));
        }
        let us = self.rule.synthesize(u)?;
        let vs = self.rule.synthesize(v)?;
        let g: Vec<Complex64> = us
            .iter()
            .zip(&vs)
            .map(|(&a, &b)| damping * g_pointwise(a, b))
            .collect();
        self.rule.forward(&g)
    }

    /// `f_L(u) = g_L(u, u)`.
    pub fn f_l(&self, u: &SpectralState) -> Result<SpectralState> {
        self.g_l(u, u)
    }
}

/// One-shot convenience over `NonlinearEvaluator` for callers that do not
/// hold a prebuilt rule.
pub fn g_l_spectral(
    u: &SpectralState,
    v: &SpectralState,
    k: usize,
    profile: CutoffProfile,
    quad_oversample: usize,
) -> Result<SpectralState> {
    NonlinearEvaluator::new(k, quad_oversample, profile)?.g_l(u, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::eval_hermite_functions;
    use crate::test_support::{adaptive_simpson, random_state};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn g_collapses_to_cubic_on_the_diagonal() {
        let u = Complex64::new(0.4, -1.1);
        let g = g_pointwise(u, u);
        let cubic = u.norm_sqr() * u;
        assert!((g - cubic).norm() < 1e-15);
        assert_eq!(
            g_pointwise(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn g_of_one_and_i() {
        let g = g_pointwise(Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0));
        assert!((g - Complex64::new(0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn g_times_conjugate_sum_is_real_to_rounding() {
        // g(u, v) is a real multiple of (u + v), so the product with
        // conj(u + v) is real; floating point leaves at most a one-ulp
        // imaginary residue from the two independent component roundings.
        let mut seed = 3u64;
        let mut next = || crate::test_support::splitmix(&mut seed);
        for _ in 0..50 {
            let u = Complex64::new(next(), next());
            let v = Complex64::new(next(), next());
            let g = g_pointwise(u, v);
            let p = g * (u + v).conj();
            let scale = g.norm() * (u + v).norm();
            assert!(
                p.im.abs() <= 4.0 * f64::EPSILON * scale.max(1e-300),
                "imaginary residue {} at scale {scale}",
                p.im
            );
        }
    }

    #[test]
    fn ramp_values_at_the_marked_points() {
        let p = CutoffProfile {
            level: 3.0,
            norm_index: 1,
            shape: CutoffShape::Smoothstep,
        };
        assert_eq!(p.theta(1.5).unwrap(), 1.0);
        assert_eq!(p.theta(6.0).unwrap(), 0.0);
        assert_abs_diff_eq!(p.theta(4.5).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(p.theta(-0.1), Err(SgpeError::Contract(_))));
        let hard = CutoffProfile {
            shape: CutoffShape::Hard,
            ..p
        };
        assert_eq!(hard.theta(3.0).unwrap(), 1.0);
        assert_eq!(hard.theta(3.0001).unwrap(), 0.0);
    }

    #[test]
    fn ramp_is_non_increasing_and_bounded() {
        for shape in [CutoffShape::Smoothstep, CutoffShape::Hard, CutoffShape::Off] {
            let p = CutoffProfile {
                level: 2.0,
                norm_index: 1,
                shape,
            };
            let mut last = 1.0;
            for i in 0..200 {
                let x = i as f64 * 0.05;
                let t = p.theta(x).unwrap();
                assert!((0.0..=1.0).contains(&t));
                assert!(t <= last + 1e-15);
                last = t;
            }
        }
    }

    #[test]
    fn zero_inputs_give_zero_output() {
        let ev = NonlinearEvaluator::new(16, 2, CutoffProfile::off()).unwrap();
        let z = SpectralState::zeros(16);
        assert_eq!(ev.g_l(&z, &z).unwrap(), z);
    }

    #[test]
    fn saturated_cutoff_annihilates_the_output() {
        let profile = CutoffProfile {
            level: 0.5,
            norm_index: 1,
            shape: CutoffShape::Smoothstep,
        };
        let ev = NonlinearEvaluator::new(8, 2, profile).unwrap();
        let mut u = random_state(8, 4);
        // push |u|_1^2 beyond 2 * level
        let scale = (2.0 / u.sigma_norm_sq(1)).sqrt() * 2.0;
        u.scale(Complex64::new(scale, 0.0));
        assert!(u.sigma_norm_sq(1) > 1.0);
        let v = random_state(8, 5);
        let out = ev.g_l(&u, &v).unwrap();
        assert_eq!(out, SpectralState::zeros(8));
    }

    #[test]
    fn symmetry_is_bitwise() {
        let ev = NonlinearEvaluator::new(12, 2, CutoffProfile::off()).unwrap();
        let u = random_state(12, 7);
        let v = random_state(12, 8);
        assert_eq!(ev.g_l(&u, &v).unwrap(), ev.g_l(&v, &u).unwrap());
    }

    #[test]
    fn f_is_the_diagonal_of_g_bitwise() {
        let ev = NonlinearEvaluator::new(10, 2, CutoffProfile::off()).unwrap();
        let u = random_state(10, 21);
        assert_eq!(ev.f_l(&u).unwrap(), ev.g_l(&u, &u).unwrap());
        assert_eq!(
            ev.f_l(&SpectralState::zeros(10)).unwrap(),
            SpectralState::zeros(10)
        );
    }

    #[test]
    fn ground_mode_cubic_matches_adaptive_integration() {
        // u = 0.1 e_0: |u|^2 u = 1e-3 e_0^3, projected mode by mode.
        let k = 12;
        let ev = NonlinearEvaluator::new(k, 2, CutoffProfile::off()).unwrap();
        let mut u = SpectralState::zeros(k);
        u.coeffs[0] = Complex64::new(0.1, 0.0);
        let out = ev.g_l(&u, &u).unwrap();
        for mode in 0..k {
            let oracle = 1e-3
                * adaptive_simpson(
                    |x| {
                        let e = eval_hermite_functions(mode.max(0), x).unwrap();
                        let e0 = eval_hermite_functions(0, x).unwrap()[0];
                        e0 * e0 * e0 * e[mode]
                    },
                    -20.0,
                    20.0,
                    1e-13,
                );
            assert!(
                (out.coeffs[mode].re - oracle).abs() < 1e-8 && out.coeffs[mode].im.abs() < 1e-12,
                "mode {mode}: {} vs {oracle}",
                out.coeffs[mode].re
            );
        }
    }

    #[test]
    fn low_band_states_agree_with_a_finer_rule() {
        // content confined to the first K/4 modes: the standard 2K-node rule
        // agrees with a 4K-node reference projection
        let k = 64;
        let standard = NonlinearEvaluator::new(k, 2, CutoffProfile::off()).unwrap();
        let fine = NonlinearEvaluator::new(k, 4, CutoffProfile::off()).unwrap();
        let mut u = SpectralState::zeros(k);
        let low = random_state(k / 4, 31);
        for (i, c) in low.coeffs.iter().enumerate() {
            u.coeffs[i] = 0.3 * c;
        }
        let a = standard.f_l(&u).unwrap();
        let b = fine.f_l(&u).unwrap();
        let err = a.sub(&b).l2_norm_sq().sqrt();
        assert!(err < 1e-9, "rule disagreement {err}");
    }

    proptest! {
        #[test]
        fn cubic_homogeneity_under_real_scaling(seed in 0u64..400, a in -2.0f64..2.0) {
            let ev = NonlinearEvaluator::new(12, 2, CutoffProfile::off()).unwrap();
            let u = random_state(12, seed);
            let v = random_state(12, seed.wrapping_add(9));
            let mut ua = u.clone();
            ua.scale(Complex64::new(a, 0.0));
            let mut va = v.clone();
            va.scale(Complex64::new(a, 0.0));
            let lhs = ev.g_l(&ua, &va).unwrap();
            let mut rhs = ev.g_l(&u, &v).unwrap();
            rhs.scale(Complex64::new(a * a * a, 0.0));
            let err = lhs.sub(&rhs).l2_norm_sq().sqrt();
            prop_assert!(err <= 1e-12 * (1.0 + rhs.l2_norm_sq().sqrt()));
        }

        #[test]
        fn truncation_never_amplifies(seed in 0u64..200, level in 0.1f64..4.0) {
            let profile = CutoffProfile { level, norm_index: 1, shape: CutoffShape::Smoothstep };
            let truncated = NonlinearEvaluator::new(10, 2, profile).unwrap();
            let plain = NonlinearEvaluator::new(10, 2, CutoffProfile::off()).unwrap();
            let u = random_state(10, seed);
            let v = random_state(10, seed.wrapping_add(1));
            let t = truncated.g_l(&u, &v).unwrap().l2_norm_sq();
            let p = plain.g_l(&u, &v).unwrap().l2_norm_sq();
            prop_assert!(t <= p * (1.0 + 1e-12));
        }
    }
}
