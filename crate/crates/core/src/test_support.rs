//! Helpers shared by the unit-test modules: a tiny deterministic value
//! source and an adaptive quadrature oracle independent of the production
//! transform path.

use num_complex::Complex64;

use crate::hermite::SpectralState;

pub fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
}

pub fn random_state(k: usize, seed: u64) -> SpectralState {
    let mut s = seed;
    SpectralState::from_coeffs(
        (0..k)
            .map(|_| Complex64::new(splitmix(&mut s), splitmix(&mut s)))
            .collect(),
    )
}

/// Adaptive Simpson quadrature with an absolute tolerance. The interval is
/// pre-split into 32 panels so localized bumps cannot hide between the
/// initial sample points.
pub fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: usize) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
    }
    let panels = 32;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = lo + h;
            let m = 0.5 * (lo + hi);
            rec(&f, lo, hi, simpson(&f, lo, m, hi), tol / panels as f64, 44)
        })
        .sum()
}
