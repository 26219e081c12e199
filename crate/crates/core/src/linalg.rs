//! Complex tridiagonal solves with partial pivoting.
//!
//! The Crank-Nicolson operators couple mode `m` only to `m +/- 2`, so the
//! pentadiagonal system splits into two independent tridiagonal systems
//! (even and odd modes). The finite-difference scheme produces a genuine
//! tridiagonal system. Both reduce to the solver below.

use num_complex::Complex64;

use crate::error::{Result, SgpeError};

fn cabs1(z: Complex64) -> f64 {
    z.re.abs() + z.im.abs()
}

/// Solves a complex tridiagonal system by Gaussian elimination with partial
/// pivoting (adjacent-row interchanges, one fill-in superdiagonal).
///
/// `dl` is the subdiagonal (length n-1), `d` the diagonal (length n),
/// `du` the superdiagonal (length n-1). Inputs are copied; `rhs` is consumed
/// and returned as the solution.
pub fn solve_tridiagonal(
    dl: &[Complex64],
    d: &[Complex64],
    du: &[Complex64],
    mut rhs: Vec<Complex64>,
) -> Result<Vec<Complex64>> {
    let n = d.len();
    if dl.len() + 1 != n || du.len() + 1 != n || rhs.len() != n {
        return Err(SgpeError::Contract(format!(
            "tridiagonal solve: inconsistent lengths (dl {}, d {}, du {}, rhs {})",
            dl.len(),
            n,
            du.len(),
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(rhs);
    }

    let mut d = d.to_vec();
    let mut du = du.to_vec();
    let mut dl = dl.to_vec();
    // dl[k] is reused to store the fill-in second superdiagonal after row k
    // has been eliminated.
    for k in 0..n - 1 {
        if cabs1(dl[k]) <= cabs1(d[k]) {
            if d[k] == Complex64::new(0.0, 0.0) {
                return Err(SgpeError::Numeric(format!(
                    "tridiagonal solve: zero pivot at row {k}"
                )));
            }
            let mult = dl[k] / d[k];
            d[k + 1] -= mult * du[k];
            let prev = rhs[k];
            rhs[k + 1] -= mult * prev;
            dl[k] = Complex64::new(0.0, 0.0);
        } else {
            let mult = d[k] / dl[k];
            d[k] = dl[k];
            let temp = d[k + 1];
            d[k + 1] = du[k] - mult * temp;
            du[k] = temp;
            if k < n - 2 {
                dl[k] = du[k + 1];
                du[k + 1] = -mult * dl[k];
            } else {
                dl[k] = Complex64::new(0.0, 0.0);
            }
            let swapped = rhs[k + 1];
            rhs[k + 1] = rhs[k] - mult * swapped;
            rhs[k] = swapped;
        }
    }
    if d[n - 1] == Complex64::new(0.0, 0.0) {
        return Err(SgpeError::Numeric(format!(
            "tridiagonal solve: zero pivot at row {}",
            n - 1
        )));
    }

    rhs[n - 1] /= d[n - 1];
    if n > 1 {
        rhs[n - 2] = (rhs[n - 2] - du[n - 2] * rhs[n - 1]) / d[n - 2];
    }
    for k in (0..n.saturating_sub(2)).rev() {
        rhs[k] = (rhs[k] - du[k] * rhs[k + 1] - dl[k] * rhs[k + 2]) / d[k];
    }
    Ok(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply_tridiagonal(
        dl: &[Complex64],
        d: &[Complex64],
        du: &[Complex64],
        x: &[Complex64],
    ) -> Vec<Complex64> {
        let n = d.len();
        (0..n)
            .map(|i| {
                let mut y = d[i] * x[i];
                if i > 0 {
                    y += dl[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += du[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    fn splitmix(state: &mut u64) -> f64 {
        *state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    #[test]
    fn random_systems_have_small_residuals() {
        let mut state = 7u64;
        for n in [1usize, 2, 3, 5, 17, 64] {
            let mut c = |_: usize| Complex64::new(splitmix(&mut state), splitmix(&mut state));
            let dl: Vec<_> = (0..n - 1).map(&mut c).collect();
            let du: Vec<_> = (0..n - 1).map(&mut c).collect();
            let d: Vec<_> = (0..n)
                .map(|i| c(i) + Complex64::new(2.0, 0.0))
                .collect();
            let b: Vec<_> = (0..n).map(&mut c).collect();
            let x = solve_tridiagonal(&dl, &d, &du, b.clone()).unwrap();
            let r = apply_tridiagonal(&dl, &d, &du, &x);
            let res: f64 = r
                .iter()
                .zip(&b)
                .map(|(ri, bi)| (ri - bi).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let bn: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(res <= 1e-13 * bn.max(1.0), "n={n} residual {res}");
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // Leading pivot is zero; the solve must interchange rows.
        let dl = vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        let d = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let du = vec![Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0)];
        let b = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
        ];
        let x = solve_tridiagonal(&dl, &d, &du, b.clone()).unwrap();
        let r = apply_tridiagonal(&dl, &d, &du, &x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_system_reports_numeric_error() {
        let dl = vec![Complex64::new(0.0, 0.0)];
        let d = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let du = vec![Complex64::new(0.0, 0.0)];
        let b = vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        let err = solve_tridiagonal(&dl, &d, &du, b).unwrap_err();
        assert!(matches!(err, SgpeError::Numeric(_)));
    }
}
