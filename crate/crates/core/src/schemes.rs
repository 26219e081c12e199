//! One-step integrators for the stochastic Gross-Pitaevskii flow and the
//! trajectory driver.
//!
//! Four discretizations share one configuration type: the implicit midpoint
//! scheme on the Hermite basis (the production integrator), a Lie splitting
//! on the same basis, a Lie splitting on periodic Fourier modes, and an
//! implicit midpoint finite-difference scheme with Dirichlet walls. The
//! Fourier and finite-difference variants fix their sign conventions so
//! that all four discretize the same continuous equation; agreement on
//! resolved data is asserted in the integration tests.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Result, SgpeError};
use crate::hermite::{HermiteBasis, SpectralState, MAX_MODES};
use crate::linalg::solve_tridiagonal;
use crate::nonlinearity::{g_pointwise, CutoffProfile, NonlinearEvaluator};
use crate::operators::{apply_cn_explicit, solve_cn_system, BandedOperator};
use crate::stochastic::{stopping_index, BrownianPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    CnHermite,
    SplitHermite,
    SplitFourier,
    CnFd,
}

impl SchemeKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::CnHermite => "cn_hermite",
            SchemeKind::SplitHermite => "split_hermite",
            SchemeKind::SplitFourier => "split_fourier",
            SchemeKind::CnFd => "cn_fd",
        }
    }

    pub fn is_spectral_hermite(&self) -> bool {
        matches!(self, SchemeKind::CnHermite | SchemeKind::SplitHermite)
    }
}

/// Which bounded stand-in for multiplication by `x^2` the midpoint scheme
/// uses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BChoice {
    /// Plain projection; the production default.
    X2FullTruncated,
    /// Smooth spectral cutoff with ramp fraction `theta`.
    BkSmooth { theta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// Full parameterization of a single run.
#[derive(Clone, Debug)]
pub struct SchemeConfig {
    pub scheme: SchemeKind,
    /// Hermite modes, Fourier grid points, or finite-difference half-grid
    /// size depending on the scheme.
    pub k: usize,
    /// Nonlinearity sign/strength; the physical model uses +1 or -1.
    pub lambda: f64,
    /// Amplitude in front of the noise term.
    pub alpha: f64,
    pub dt: f64,
    pub t_final: f64,
    pub b_choice: BChoice,
    /// Increment-truncation level; +inf disables the stopping time.
    pub c0: f64,
    pub cutoff: CutoffProfile,
    /// Half-domain for the grid-based schemes.
    pub lx: Option<f64>,
    pub fp_tol: f64,
    pub fp_max_iter: usize,
    pub quad_oversample: usize,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeKind, k: usize, dt: f64, t_final: f64) -> Self {
        Self {
            scheme,
            k,
            lambda: 1.0,
            alpha: 0.0,
            dt,
            t_final,
            b_choice: BChoice::X2FullTruncated,
            c0: f64::INFINITY,
            cutoff: CutoffProfile::off(),
            lx: None,
            fp_tol: 1e-12,
            fp_max_iter: 50,
            quad_oversample: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > MAX_MODES {
            return Err(SgpeError::Config(format!(
                "k = {} outside [1, {MAX_MODES}]",
                self.k
            )));
        }
        if self.scheme == SchemeKind::SplitFourier && self.k < 4 {
            return Err(SgpeError::Config(
                "split_fourier needs at least 4 grid points".into(),
            ));
        }
        if self.scheme == SchemeKind::CnFd && self.k < 2 {
            return Err(SgpeError::Config(
                "cn_fd needs a half-grid size of at least 2".into(),
            ));
        }
        if !self.lambda.is_finite() {
            return Err(SgpeError::Config(format!("lambda = {} not finite", self.lambda)));
        }
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(SgpeError::Config(format!(
                "alpha = {} must be finite and >= 0",
                self.alpha
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SgpeError::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(SgpeError::Config(format!(
                "T = {} must be finite and >= 0",
                self.t_final
            )));
        }
        self.n_steps()?;
        if !(self.c0 > 0.0) {
            return Err(SgpeError::Config(format!("c0 = {} must be positive", self.c0)));
        }
        self.cutoff.validate()?;
        if let BChoice::BkSmooth { theta } = self.b_choice {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(SgpeError::Config(format!(
                    "cutoff fraction theta = {theta} outside (0, 1)"
                )));
            }
        }
        let needs_domain = matches!(self.scheme, SchemeKind::SplitFourier | SchemeKind::CnFd);
        match self.lx {
            Some(lx) if !(lx > 0.0 && lx.is_finite()) => {
                return Err(SgpeError::Config(format!("Lx = {lx} must be positive")));
            }
            None if needs_domain => {
                return Err(SgpeError::Config(format!(
                    "scheme {} requires the half-domain Lx",
                    self.scheme.name()
                )));
            }
            _ => {}
        }
        if !(self.fp_tol > 0.0) || self.fp_max_iter == 0 {
            return Err(SgpeError::Config(format!(
                "fixed-point parameters tol = {}, max_iter = {} invalid",
                self.fp_tol, self.fp_max_iter
            )));
        }
        if self.quad_oversample == 0 {
            return Err(SgpeError::Config(
                "quadrature oversampling factor must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> Result<usize> {
        if self.t_final == 0.0 {
            return Ok(0);
        }
        let ratio = self.t_final / self.dt;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 {
            return Err(SgpeError::Config(format!(
                "T / dt = {ratio} is not an integer step count"
            )));
        }
        Ok(n as usize)
    }

    /// Number of grid points used by the grid-based schemes.
    pub fn grid_points(&self) -> usize {
        match self.scheme {
            SchemeKind::SplitFourier => self.k,
            SchemeKind::CnFd => 2 * self.k + 1,
            _ => self.k,
        }
    }
}

/// Complex samples on a uniform grid over [-Lx, Lx].
///
/// Periodic grids exclude the right endpoint; Dirichlet grids include both
/// endpoints and pin them to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    pub values: Vec<Complex64>,
    pub lx: f64,
    pub boundary: Boundary,
}

impl GridState {
    pub fn periodic_from_fn(points: usize, lx: f64, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let dx = 2.0 * lx / points as f64;
        let values = (0..points).map(|j| f(-lx + j as f64 * dx)).collect();
        Self {
            values,
            lx,
            boundary: Boundary::Periodic,
        }
    }

    pub fn dirichlet_from_fn(half_grid: usize, lx: f64, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let dx = lx / half_grid as f64;
        let n = 2 * half_grid + 1;
        let mut values: Vec<Complex64> = (0..n).map(|j| f(-lx + j as f64 * dx)).collect();
        values[0] = Complex64::new(0.0, 0.0);
        values[n - 1] = Complex64::new(0.0, 0.0);
        Self {
            values,
            lx,
            boundary: Boundary::Dirichlet,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![Complex64::new(0.0, 0.0); self.values.len()],
            lx: self.lx,
            boundary: self.boundary,
        }
    }

    pub fn dx(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => 2.0 * self.lx / self.values.len() as f64,
            Boundary::Dirichlet => 2.0 * self.lx / (self.values.len() - 1) as f64,
        }
    }

    /// x-coordinate of grid point j.
    pub fn x_at(&self, j: usize) -> f64 {
        -self.lx + j as f64 * self.dx()
    }

    /// Discrete squared L2 norm, `dx * sum |v|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.dx() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// Discrete analogue of `<A phi, phi>`: `||phi'||^2 + ||x phi||^2` with a
    /// forward-difference derivative.
    pub fn sigma1_norm_sq(&self) -> f64 {
        let dx = self.dx();
        let mut grad = 0.0;
        for w in self.values.windows(2) {
            grad += (w[1] - w[0]).norm_sqr();
        }
        // periodic wrap term
        if self.boundary == Boundary::Periodic {
            let n = self.values.len();
            grad += (self.values[0] - self.values[n - 1]).norm_sqr();
        }
        let weighted: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let x = self.x_at(j);
                x * x * v.norm_sqr()
            })
            .sum();
        grad / dx + dx * weighted
    }

    pub fn sub(&self, other: &GridState) -> GridState {
        debug_assert_eq!(self.values.len(), other.values.len());
        GridState {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
            lx: self.lx,
            boundary: self.boundary,
        }
    }
}

/// State of a trajectory: spectral coefficients for the Hermite schemes,
/// nodal samples for the grid schemes.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldState {
    Spectral(SpectralState),
    Grid(GridState),
}

impl FieldState {
    pub fn l2_norm_sq(&self) -> f64 {
        match self {
            FieldState::Spectral(s) => s.l2_norm_sq(),
            FieldState::Grid(g) => g.l2_norm_sq(),
        }
    }

    pub fn sigma1_norm_sq(&self) -> f64 {
        match self {
            FieldState::Spectral(s) => s.sigma_norm_sq(1),
            FieldState::Grid(g) => g.sigma1_norm_sq(),
        }
    }

    pub fn as_spectral(&self) -> Result<&SpectralState> {
        match self {
            FieldState::Spectral(s) => Ok(s),
            FieldState::Grid(_) => Err(SgpeError::Contract(
                "expected a spectral state, found a grid state".into(),
            )),
        }
    }

    pub fn as_grid(&self) -> Result<&GridState> {
        match self {
            FieldState::Grid(g) => Ok(g),
            FieldState::Spectral(_) => Err(SgpeError::Contract(
                "expected a grid state, found a spectral state".into(),
            )),
        }
    }
}

/// Prebuilt objects for the Hermite-basis schemes.
pub struct HermiteMachinery {
    pub basis: HermiteBasis,
    pub b_op: BandedOperator,
    pub nonlin: NonlinearEvaluator,
}

impl HermiteMachinery {
    pub fn build(cfg: &SchemeConfig) -> Result<Self> {
        let basis = HermiteBasis::new(cfg.k)?;
        let b_op = match cfg.b_choice {
            BChoice::X2FullTruncated => BandedOperator::x2_truncated(cfg.k),
            BChoice::BkSmooth { theta } => BandedOperator::bk_smooth(cfg.k, theta)?,
        };
        let nonlin = NonlinearEvaluator::new(cfg.k, cfg.quad_oversample, cfg.cutoff)?;
        Ok(Self {
            basis,
            b_op,
            nonlin,
        })
    }
}

/// FFT plans and mode frequencies for the periodic splitting scheme.
pub struct FourierMachinery {
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inverse: std::sync::Arc<dyn rustfft::Fft<f64>>,
    /// Signed angular frequencies in FFT storage order.
    freqs: Vec<f64>,
}

impl FourierMachinery {
    pub fn build(points: usize, lx: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        let freqs = (0..points)
            .map(|m| {
                let signed = if m <= points / 2 {
                    m as isize
                } else {
                    m as isize - points as isize
                };
                std::f64::consts::PI * signed as f64 / lx
            })
            .collect();
        Self {
            forward,
            inverse,
            freqs,
        }
    }
}

/// One step of the implicit midpoint scheme on the Hermite basis.
///
/// Solves `D phi' = C phi - i lambda dt P_K g(phi, phi')` by fixed-point
/// iteration started from the linear-only update; the noise enters the
/// midpoint operators as `alpha * sqrt(dt) * chi` times the bounded
/// `x^2` stand-in. Returns the new state and the iteration count.
pub fn cn_hermite_step(
    state: &SpectralState,
    chi: f64,
    cfg: &SchemeConfig,
    mach: &HermiteMachinery,
) -> Result<(SpectralState, usize)> {
    if !state.is_finite() {
        return Err(SgpeError::Contract("state has non-finite coefficients".into()));
    }
    let chi_eff = cfg.alpha * chi;
    let dt = cfg.dt;
    let rhs_linear = apply_cn_explicit(dt, chi_eff, &mach.b_op, state)?;
    let mut cur = solve_cn_system(dt, chi_eff, &mach.b_op, &rhs_linear)?;
    if cfg.lambda == 0.0 {
        return Ok((cur, 0));
    }
    let tol = cfg.fp_tol * state.l2_norm_sq().sqrt();
    let minus_i_lambda_dt = Complex64::new(0.0, -cfg.lambda * dt);
    for iter in 1..=cfg.fp_max_iter {
        let g = mach.nonlin.g_l(state, &cur)?;
        let mut rhs = rhs_linear.clone();
        rhs.add_scaled(minus_i_lambda_dt, &g);
        let next = solve_cn_system(dt, chi_eff, &mach.b_op, &rhs)?;
        let delta = next.sub(&cur).l2_norm_sq().sqrt();
        cur = next;
        if delta <= tol {
            return Ok((cur, iter));
        }
    }
    Err(SgpeError::Numeric(format!(
        "midpoint fixed point did not converge in {} iterations (tolerance {:.3e}); \
         reduce dt or raise the truncation level",
        cfg.fp_max_iter, tol
    )))
}

/// One step of the Lie splitting on the Hermite basis: exact oscillator
/// flow in the modes, then an exact pointwise phase for the noise and the
/// cubic term on the basis' own nodes.
pub fn split_hermite_step(
    state: &SpectralState,
    chi: f64,
    cfg: &SchemeConfig,
    mach: &HermiteMachinery,
) -> Result<SpectralState> {
    let dt = cfg.dt;
    let mut mid = state.clone();
    for (k, c) in mid.coeffs.iter_mut().enumerate() {
        let phase = -((2 * k + 1) as f64) * dt;
        *c *= Complex64::from_polar(1.0, phase);
    }
    let mut samples = mach.basis.synthesize(&mid)?;
    let noise = cfg.alpha * dt.sqrt() * chi;
    for (s, &x) in samples.iter_mut().zip(mach.basis.nodes()) {
        let phase = -(x * x * noise + cfg.lambda * s.norm_sqr() * dt);
        *s *= Complex64::from_polar(1.0, phase);
    }
    mach.basis.forward(&samples)
}

/// One step of the Lie splitting on periodic Fourier modes: exact free
/// flow in the modes, then the exact pointwise phase carrying the harmonic
/// potential, the noise and the cubic term.
pub fn split_fourier_step(
    state: &GridState,
    chi: f64,
    cfg: &SchemeConfig,
    mach: &FourierMachinery,
) -> Result<GridState> {
    if state.boundary != Boundary::Periodic {
        return Err(SgpeError::Contract(
            "split_fourier requires a periodic grid".into(),
        ));
    }
    if state.values.len() != mach.freqs.len() {
        return Err(SgpeError::Contract(format!(
            "grid has {} points but the transform was planned for {}",
            state.values.len(),
            mach.freqs.len()
        )));
    }
    let dt = cfg.dt;
    let mut buf = state.values.clone();
    mach.forward.process(&mut buf);
    for (v, &xi) in buf.iter_mut().zip(&mach.freqs) {
        *v *= Complex64::from_polar(1.0, -xi * xi * dt);
    }
    mach.inverse.process(&mut buf);
    let scale = 1.0 / state.values.len() as f64;
    let pot = dt + cfg.alpha * dt.sqrt() * chi;
    let mut out = state.zeros_like();
    for (j, v) in buf.iter().enumerate() {
        let v = v * scale;
        let x = state.x_at(j);
        let phase = -(x * x * pot + cfg.lambda * v.norm_sqr() * dt);
        out.values[j] = v * Complex64::from_polar(1.0, phase);
    }
    Ok(out)
}

/// One step of the implicit midpoint scheme with a three-point Laplacian on
/// a Dirichlet grid of `2K + 1` points. The inner linear solves are complex
/// tridiagonal systems; the cubic term is iterated like the spectral scheme.
pub fn cn_fd_step(
    state: &GridState,
    chi: f64,
    cfg: &SchemeConfig,
) -> Result<(GridState, usize)> {
    if state.boundary != Boundary::Dirichlet {
        return Err(SgpeError::Contract("cn_fd requires a Dirichlet grid".into()));
    }
    let n = state.values.len();
    if n < 3 {
        return Err(SgpeError::Contract("cn_fd grid too small".into()));
    }
    let dt = cfg.dt;
    let dx = state.dx();
    let inv_dx2 = 1.0 / (dx * dx);
    let pot_factor = dt + cfg.alpha * dt.sqrt() * chi;
    let interior = n - 2;

    // midpoint operator on interior points: Id + (i/2)(dt (-Lap) + pot x^2)
    let diag: Vec<Complex64> = (1..n - 1)
        .map(|j| {
            let x = state.x_at(j);
            Complex64::new(1.0, 0.5 * (2.0 * dt * inv_dx2 + pot_factor * x * x))
        })
        .collect();
    let off = vec![Complex64::new(0.0, -0.5 * dt * inv_dx2); interior - 1];

    let apply_implicit = |v: &[Complex64]| -> Vec<Complex64> {
        (0..interior)
            .map(|i| {
                let mut y = diag[i] * v[i];
                if i > 0 {
                    y += off[i - 1] * v[i - 1];
                }
                if i + 1 < interior {
                    y += off[i] * v[i + 1];
                }
                y
            })
            .collect()
    };

    let phi_n: Vec<Complex64> = state.values[1..n - 1].to_vec();
    // explicit side = 2 phi - D phi
    let d_phi = apply_implicit(&phi_n);
    let rhs_linear: Vec<Complex64> = phi_n
        .iter()
        .zip(&d_phi)
        .map(|(p, d)| 2.0 * p - d)
        .collect();

    let mut cur = solve_tridiagonal(&off, &diag, &off, rhs_linear.clone())?;
    let mut iters = 0usize;
    if cfg.lambda != 0.0 {
        let norm0 = (dx * phi_n.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
        let tol = cfg.fp_tol * norm0;
        let minus_i_lambda_dt = Complex64::new(0.0, -cfg.lambda * dt);
        let mut converged = false;
        for iter in 1..=cfg.fp_max_iter {
            let rhs: Vec<Complex64> = (0..interior)
                .map(|i| rhs_linear[i] + minus_i_lambda_dt * g_pointwise(phi_n[i], cur[i]))
                .collect();
            let next = solve_tridiagonal(&off, &diag, &off, rhs)?;
            let delta = (dx
                * next
                    .iter()
                    .zip(&cur)
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>())
            .sqrt();
            cur = next;
            iters = iter;
            if delta <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SgpeError::Numeric(format!(
                "finite-difference fixed point did not converge in {} iterations",
                cfg.fp_max_iter
            )));
        }
    }

    let mut out = state.zeros_like();
    out.values[1..n - 1].copy_from_slice(&cur);
    Ok((out, iters))
}

/// Per-step diagnostics recorded along a trajectory.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub l2_norm_sq: f64,
    pub sigma1_norm_sq: f64,
    pub fp_iters: usize,
    pub chi: f64,
}

/// Result of evolving one trajectory to the horizon.
#[derive(Debug)]
pub struct Trajectory {
    pub final_state: FieldState,
    pub records: Vec<StepRecord>,
    /// First step at which the increment truncation fired; `n + 1` when it
    /// never did. States from this step on are frozen.
    pub stopping_index: usize,
}

/// Evolves `initial` over `cfg.t_final` driven by `path`.
///
/// The path may be finer than `cfg.dt`; it is coarsened by the integer
/// ratio so coupled-refinement studies consume one shared trajectory.
/// From the stopping index on, the state is frozen in place.
pub fn evolve(cfg: &SchemeConfig, path: &BrownianPath, initial: FieldState) -> Result<Trajectory> {
    cfg.validate()?;
    let n = cfg.n_steps()?;
    let mut records = Vec::with_capacity(n + 1);

    let chis: Vec<f64> = if n == 0 {
        Vec::new()
    } else {
        if path.t_horizon() + 1e-12 < cfg.t_final {
            return Err(SgpeError::Config(format!(
                "path horizon {} shorter than T = {}",
                path.t_horizon(),
                cfg.t_final
            )));
        }
        let ratio = cfg.dt / path.dt();
        let factor = ratio.round();
        if (ratio - factor).abs() > 1e-9 || factor < 1.0 {
            return Err(SgpeError::Config(format!(
                "cfg.dt = {} is not an integer multiple of the path step {}",
                cfg.dt,
                path.dt()
            )));
        }
        let working = path.coarsen(factor as usize)?;
        if working.n_steps() < n {
            return Err(SgpeError::Config(format!(
                "path provides {} steps, run needs {n}",
                working.n_steps()
            )));
        }
        working.chi_sequence()[..n].to_vec()
    };
    let tau = if n == 0 {
        1
    } else {
        stopping_index(&chis, cfg.dt, cfg.c0)
    };

    enum Machinery {
        Hermite(HermiteMachinery),
        Fourier(FourierMachinery),
        None,
    }

    let mach = match cfg.scheme {
        SchemeKind::CnHermite | SchemeKind::SplitHermite => {
            let state = initial.as_spectral()?;
            if state.len() != cfg.k {
                return Err(SgpeError::Contract(format!(
                    "initial state has {} modes, config wants {}",
                    state.len(),
                    cfg.k
                )));
            }
            Machinery::Hermite(HermiteMachinery::build(cfg)?)
        }
        SchemeKind::SplitFourier => {
            let grid = initial.as_grid()?;
            if grid.values.len() != cfg.grid_points() || grid.boundary != Boundary::Periodic {
                return Err(SgpeError::Contract(format!(
                    "initial grid ({} points) does not match the config ({} periodic points)",
                    grid.values.len(),
                    cfg.grid_points()
                )));
            }
            Machinery::Fourier(FourierMachinery::build(cfg.grid_points(), grid.lx))
        }
        SchemeKind::CnFd => {
            let grid = initial.as_grid()?;
            if grid.values.len() != cfg.grid_points() || grid.boundary != Boundary::Dirichlet {
                return Err(SgpeError::Contract(format!(
                    "initial grid ({} points) does not match the config ({} Dirichlet points)",
                    grid.values.len(),
                    cfg.grid_points()
                )));
            }
            Machinery::None
        }
    };

    let mut state = initial;
    records.push(StepRecord {
        step: 0,
        t: 0.0,
        l2_norm_sq: state.l2_norm_sq(),
        sigma1_norm_sq: state.sigma1_norm_sq(),
        fp_iters: 0,
        chi: 0.0,
    });

    for step in 1..=n {
        let chi = chis[step - 1];
        let mut fp_iters = 0usize;
        if step < tau {
            state = match (&mach, &state) {
                (Machinery::Hermite(m), FieldState::Spectral(s)) => match cfg.scheme {
                    SchemeKind::CnHermite => {
                        let (next, iters) =
                            cn_hermite_step(s, chi, cfg, m).map_err(|e| e.at_step(step))?;
                        fp_iters = iters;
                        FieldState::Spectral(next)
                    }
                    _ => FieldState::Spectral(
                        split_hermite_step(s, chi, cfg, m).map_err(|e| e.at_step(step))?,
                    ),
                },
                (Machinery::Fourier(m), FieldState::Grid(g)) => FieldState::Grid(
                    split_fourier_step(g, chi, cfg, m).map_err(|e| e.at_step(step))?,
                ),
                (Machinery::None, FieldState::Grid(g)) => {
                    let (next, iters) = cn_fd_step(g, chi, cfg).map_err(|e| e.at_step(step))?;
                    fp_iters = iters;
                    FieldState::Grid(next)
                }
                _ => unreachable!("machinery matches the state kind"),
            };
        }
        records.push(StepRecord {
            step,
            t: step as f64 * cfg.dt,
            l2_norm_sq: state.l2_norm_sq(),
            sigma1_norm_sq: state.sigma1_norm_sq(),
            fp_iters,
            chi,
        });
    }

    Ok(Trajectory {
        final_state: state,
        records,
        stopping_index: tau,
    })
}
