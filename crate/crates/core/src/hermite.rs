//! Hermite-function basis: Gauss-Hermite quadrature, the discrete Hermite
//! transform and weighted Sobolev norms.
//!
//! The basis functions `e_k` are the eigenfunctions of `-d^2/dx^2 + x^2`
//! with eigenvalues `2k + 1`. Quadrature weights are pre-divided by the
//! Gaussian factor so the transform consumes Hermite-function samples
//! directly; with `K` nodes the transform is exact (to round-off) on the
//! span of the first `K` basis functions.

use num_complex::Complex64;

use crate::error::{Result, SgpeError};

/// Largest supported number of modes. Generously above anything the
/// experiment presets use while keeping basis construction cheap.
pub const MAX_MODES: usize = 4096;

const SCALE_LIMIT: f64 = 1.34078079299425971e154; // 2^512
const SCALE_DOWN: f64 = 7.45834073120020674e-155; // 2^-512

/// Evaluates `e_0(x), ..., e_{n_max}(x)`.
///
/// Runs the upward three-term recurrence on `u_k = e_k(x) * exp(x^2/2)`,
/// renormalized by exact powers of two, and reattaches the Gaussian factor
/// per entry. This keeps intermediates representable where the naive seed
/// `e_0(x)` would underflow (large `|x|` at large mode counts).
pub fn eval_hermite_functions(n_max: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() {
        return Err(SgpeError::Domain(format!(
            "hermite evaluation at non-finite x = {x}"
        )));
    }
    let mut out = vec![0.0; n_max + 1];
    // Crude envelope |e_k(x)| <= pi^{-1/4} (sqrt(2)|x| + 1)^k exp(-x^2/2):
    // when even that is below the subnormal floor, every output is zero.
    let growth = (std::f64::consts::SQRT_2 * x.abs() + 1.0).ln();
    if n_max as f64 * growth - 0.5 * x * x < -800.0 {
        return Ok(out);
    }

    let log2_gauss = -0.5 * x * x * std::f64::consts::LOG2_E;
    let mut shift = 0.0f64;
    let mut prev = 0.0f64;
    let mut cur = std::f64::consts::PI.powf(-0.25);
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = attach_exponent(cur, log2_gauss + shift);
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        while cur.abs() > SCALE_LIMIT {
            cur *= SCALE_DOWN;
            prev *= SCALE_DOWN;
            shift += 512.0;
        }
    }
    Ok(out)
}

fn attach_exponent(mantissa: f64, exp2: f64) -> f64 {
    if mantissa == 0.0 {
        return 0.0;
    }
    if exp2 > -700.0 {
        return mantissa * exp2.exp2();
    }
    let mut v = mantissa;
    let mut rem = exp2;
    while rem < -700.0 && v != 0.0 {
        v *= (-700.0f64).exp2();
        rem += 700.0;
    }
    v * rem.exp2()
}

/// Gauss-Hermite rule adapted to Hermite-function samples, together with the
/// basis evaluations at the nodes.
///
/// `k_modes` is the dimension of the spectral space; the rule may carry more
/// nodes than modes (`with_nodes`) for de-aliased projections of nonlinear
/// terms.
#[derive(Clone, Debug)]
pub struct HermiteBasis {
    k_modes: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// Row k holds e_k at every node; len = k_modes * nodes.len().
    eval: Vec<f64>,
}

impl HermiteBasis {
    /// Builds the `K`-mode basis with its own `K`-node quadrature.
    pub fn new(k_modes: usize) -> Result<Self> {
        Self::with_nodes(k_modes, k_modes)
    }

    /// Builds a `k_modes`-dimensional basis sampled on an `n_nodes`-point
    /// Gauss-Hermite rule, `n_nodes >= k_modes`.
    pub fn with_nodes(k_modes: usize, n_nodes: usize) -> Result<Self> {
        if k_modes == 0 || k_modes > MAX_MODES {
            return Err(SgpeError::Config(format!(
                "mode count K = {k_modes} outside [1, {MAX_MODES}]"
            )));
        }
        if n_nodes < k_modes || n_nodes > MAX_MODES {
            return Err(SgpeError::Config(format!(
                "node count {n_nodes} outside [K, {MAX_MODES}] for K = {k_modes}"
            )));
        }

        let nodes = gauss_hermite_nodes(n_nodes)?;
        let mut weights = Vec::with_capacity(n_nodes);
        let mut eval = vec![0.0; k_modes * n_nodes];
        for (i, &x) in nodes.iter().enumerate() {
            let vals = eval_hermite_functions(n_nodes - 1, x)?;
            // Christoffel weight of the n-point rule, with the Gaussian factor
            // absorbed: 1 / sum_{k<n} e_k(x_i)^2.
            let s: f64 = vals.iter().map(|v| v * v).sum();
            if !(s.is_finite() && s > 0.0) {
                return Err(SgpeError::Numeric(format!(
                    "degenerate quadrature weight at node {i} (x = {x})"
                )));
            }
            weights.push(1.0 / s);
            for k in 0..k_modes {
                eval[k * n_nodes + i] = vals[k];
            }
        }

        let eigenvalues = (0..k_modes).map(|k| (2 * k + 1) as f64).collect();
        Ok(Self {
            k_modes,
            nodes,
            weights,
            eigenvalues,
            eval,
        })
    }

    pub fn k_modes(&self) -> usize {
        self.k_modes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// e_k at node i.
    pub fn basis_value(&self, k: usize, i: usize) -> f64 {
        self.eval[k * self.nodes.len() + i]
    }

    #[cfg(test)]
    pub(crate) fn basis_value_mut(&mut self, k: usize, i: usize) -> &mut f64 {
        let n = self.nodes.len();
        &mut self.eval[k * n + i]
    }

    /// Test hook for the self-test fault-injection battery: perturbs one
    /// quadrature weight so orthonormality checks must fail.
    pub fn corrupt_weight_for_fault_injection(&mut self) {
        if let Some(w) = self.weights.first_mut() {
            *w *= 1.0 + 1.0e-6;
        }
    }

    /// Discrete Hermite transform: coefficients of the sampled function.
    ///
    /// `samples[i]` must be the function value at `nodes()[i]`.
    pub fn forward(&self, samples: &[Complex64]) -> Result<SpectralState> {
        let n = self.nodes.len();
        if samples.len() != n {
            return Err(SgpeError::Contract(format!(
                "forward transform: {} samples for {} nodes",
                samples.len(),
                n
            )));
        }
        let weighted: Vec<Complex64> = samples
            .iter()
            .zip(&self.weights)
            .map(|(s, &w)| s * w)
            .collect();
        let mut coeffs = Vec::with_capacity(self.k_modes);
        for k in 0..self.k_modes {
            let row = &self.eval[k * n..(k + 1) * n];
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &e) in weighted.iter().zip(row) {
                acc += t * e;
            }
            coeffs.push(acc);
        }
        Ok(SpectralState { coeffs })
    }

    /// Synthesis at the quadrature nodes; inverse of `forward` on the span
    /// of the first `k_modes` basis functions.
    pub fn synthesize(&self, state: &SpectralState) -> Result<Vec<Complex64>> {
        if state.len() != self.k_modes {
            return Err(SgpeError::Contract(format!(
                "synthesis: state has {} coefficients, basis has {} modes",
                state.len(),
                self.k_modes
            )));
        }
        let n = self.nodes.len();
        let mut samples = vec![Complex64::new(0.0, 0.0); n];
        for (k, &c) in state.coeffs.iter().enumerate() {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let row = &self.eval[k * n..(k + 1) * n];
            for (s, &e) in samples.iter_mut().zip(row) {
                *s += c * e;
            }
        }
        Ok(samples)
    }
}

/// Complex coefficient vector in the Hermite basis.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub coeffs: Vec<Complex64>,
}

impl SpectralState {
    pub fn zeros(k: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); k],
        }
    }

    /// Unit coefficient vector: the pure mode `e_idx`.
    pub fn unit(k: usize, idx: usize) -> Self {
        let mut s = Self::zeros(k);
        s.coeffs[idx] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Squared L2 norm (Parseval).
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Squared weighted Sobolev norm of index `j`:
    /// `sum_k (2k+1)^j |c_k|^2`. Index 0 recovers the L2 norm.
    pub fn sigma_norm_sq(&self, j: u32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| ((2 * k + 1) as f64).powi(j as i32) * c.norm_sqr())
            .sum()
    }

    pub fn scale(&mut self, a: Complex64) {
        for c in &mut self.coeffs {
            *c *= a;
        }
    }

    /// self += a * other
    pub fn add_scaled(&mut self, a: Complex64, other: &SpectralState) {
        debug_assert_eq!(self.len(), other.len());
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
    }

    pub fn sub(&self, other: &SpectralState) -> SpectralState {
        debug_assert_eq!(self.len(), other.len());
        SpectralState {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

/// Mode projection of the L2-normalized Gaussian profile
/// `(a/pi)^{1/4} exp(-a x^2 / 2)`, truncated to `k` modes.
///
/// Odd coefficients vanish; even ones follow
/// `c_{m+1} = rho * sqrt(m / (m+1)) * c_{m-1}` with `rho = (1-a)/(1+a)`.
/// Truncations at different `k` are nested projections of one function,
/// which is what refinement studies need; the truncated norm approaches 1
/// from below as `k` grows.
pub fn gaussian_state(k: usize, a: f64) -> Result<SpectralState> {
    if !(a.is_finite() && a > 0.0) {
        return Err(SgpeError::Config(format!(
            "gaussian profile parameter a = {a} must be positive and finite"
        )));
    }
    if k == 0 {
        return Err(SgpeError::Config("gaussian profile needs K >= 1".into()));
    }
    let rho = (1.0 - a) / (1.0 + a);
    let c0 = (a / std::f64::consts::PI).powf(0.25)
        * std::f64::consts::PI.powf(-0.25)
        * (2.0 * std::f64::consts::PI / (1.0 + a)).sqrt();
    let mut c = vec![0.0f64; k];
    c[0] = c0;
    let mut m = 1usize;
    while m + 1 < k {
        c[m + 1] = rho * ((m as f64) / (m as f64 + 1.0)).sqrt() * c[m - 1];
        m += 2;
    }
    Ok(SpectralState {
        coeffs: c.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
    })
}

/// The normalized Gaussian profile itself, for sampling on grids.
pub fn gaussian_profile(a: f64, x: f64) -> f64 {
    (a / std::f64::consts::PI).powf(0.25) * (-0.5 * a * x * x).exp()
}

/// Nodes of the n-point Gauss-Hermite rule: eigenvalues of the Jacobi matrix
/// of the orthonormal Hermite recurrence, symmetrized about the origin.
fn gauss_hermite_nodes(n: usize) -> Result<Vec<f64>> {
    let diag = vec![0.0f64; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
    let mut nodes = symmetric_tridiagonal_eigenvalues(diag, off)?;
    nodes.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    for i in 0..n / 2 {
        let v = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -v;
        nodes[n - 1 - i] = v;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    for w in nodes.windows(2) {
        if !(w[0] < w[1]) {
            return Err(SgpeError::Numeric(
                "quadrature nodes are not strictly increasing".into(),
            ));
        }
    }
    Ok(nodes)
}

/// Eigenvalues of a symmetric tridiagonal matrix by the implicit-shift QL
/// iteration. Destroys its inputs; returns the unsorted spectrum.
fn symmetric_tridiagonal_eigenvalues(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    e.resize(n, 0.0);
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(SgpeError::Numeric(format!(
                    "tridiagonal QL failed to converge at row {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                f = (d[i] - g) * s + 2.0 * c * b;
                p = s * f;
                d[i + 1] = g + p;
                g = c * f - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}
