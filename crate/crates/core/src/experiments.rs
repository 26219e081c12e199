//! Monte Carlo convergence and stability studies.
//!
//! Each study drives the integrators over shared Brownian paths so that
//! refinement comparisons isolate discretization error from noise
//! realization. Samples run in parallel; per-sample streams are derived
//! from the study seed and aggregation happens in sample order, so results
//! are bitwise reproducible regardless of thread count.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, SgpeError};
use crate::hermite::{eval_hermite_functions, gaussian_profile, gaussian_state, SpectralState};
use crate::schemes::{
    evolve, Boundary, FieldState, GridState, SchemeConfig, SchemeKind, Trajectory,
};
use crate::stochastic::{derive_seed, BrownianPath};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    /// Successive-resolution pathwise errors per scheme on one trajectory.
    SpacePathwise,
    /// Fourier solutions on several domains against a fine Hermite reference.
    CrossScheme,
    /// Mean-square successive-step errors over coupled samples.
    TimeMeansquare,
    /// Mean-square midpoint-vs-splitting gap over a (modes, dt) grid.
    StabilityVsK,
}

impl StudyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StudyKind::SpacePathwise => "space_pathwise",
            StudyKind::CrossScheme => "cross_scheme",
            StudyKind::TimeMeansquare => "time_meansquare",
            StudyKind::StabilityVsK => "stability_vs_k",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorNorm {
    L2,
    Sigma1,
}

impl ErrorNorm {
    pub fn name(&self) -> &'static str {
        match self {
            ErrorNorm::L2 => "l2",
            ErrorNorm::Sigma1 => "sigma1",
        }
    }
}

/// Initial wavefunction shared by every scheme in a study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialProfile {
    /// Normalized Gaussian `(a/pi)^{1/4} exp(-a x^2/2)`; small `a` spreads
    /// energy over many modes.
    Gaussian { a: f64 },
    /// The oscillator ground mode.
    GroundMode,
    /// `(e_0 + e_2)/sqrt(2)`.
    ModeMix02,
}

impl InitialProfile {
    pub fn name(&self) -> String {
        match self {
            InitialProfile::Gaussian { a } => format!("gaussian(a={a})"),
            InitialProfile::GroundMode => "ground".into(),
            InitialProfile::ModeMix02 => "mix02".into(),
        }
    }

    /// Evaluates the continuum profile at a point.
    pub fn value_at(&self, x: f64) -> Result<f64> {
        Ok(match self {
            InitialProfile::Gaussian { a } => gaussian_profile(*a, x),
            InitialProfile::GroundMode => eval_hermite_functions(0, x)?[0],
            InitialProfile::ModeMix02 => {
                let e = eval_hermite_functions(2, x)?;
                (e[0] + e[2]) / 2.0f64.sqrt()
            }
        })
    }

    /// Builds the state matching a scheme configuration.
    pub fn build(&self, cfg: &SchemeConfig) -> Result<FieldState> {
        match cfg.scheme {
            SchemeKind::CnHermite | SchemeKind::SplitHermite => {
                let state = match self {
                    InitialProfile::Gaussian { a } => gaussian_state(cfg.k, *a)?,
                    InitialProfile::GroundMode => SpectralState::unit(cfg.k, 0),
                    InitialProfile::ModeMix02 => {
                        if cfg.k < 3 {
                            return Err(SgpeError::Config(
                                "mode mix initial state needs K >= 3".into(),
                            ));
                        }
                        let mut s = SpectralState::zeros(cfg.k);
                        let w = Complex64::new(1.0 / 2.0f64.sqrt(), 0.0);
                        s.coeffs[0] = w;
                        s.coeffs[2] = w;
                        s
                    }
                };
                Ok(FieldState::Spectral(state))
            }
            SchemeKind::SplitFourier => {
                let lx = cfg.lx.ok_or_else(|| {
                    SgpeError::Config("fourier initial state needs Lx".into())
                })?;
                let mut err = None;
                let grid = GridState::periodic_from_fn(cfg.grid_points(), lx, |x| {
                    match self.value_at(x) {
                        Ok(v) => Complex64::new(v, 0.0),
                        Err(e) => {
                            err = Some(e);
                            Complex64::new(0.0, 0.0)
                        }
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(FieldState::Grid(grid)),
                }
            }
            SchemeKind::CnFd => {
                let lx = cfg.lx.ok_or_else(|| {
                    SgpeError::Config("finite-difference initial state needs Lx".into())
                })?;
                let mut err = None;
                let grid = GridState::dirichlet_from_fn(cfg.k, lx, |x| match self.value_at(x) {
                    Ok(v) => Complex64::new(v, 0.0),
                    Err(e) => {
                        err = Some(e);
                        Complex64::new(0.0, 0.0)
                    }
                });
                match err {
                    Some(e) => Err(e),
                    None => Ok(FieldState::Grid(grid)),
                }
            }
        }
    }
}

/// Full parameterization of one study.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub base: SchemeConfig,
    /// Resolution ladder: degrees of freedom for the space studies, step
    /// counts (T/dt) for the time study, mode counts for the stability grid.
    pub ladder: Vec<usize>,
    pub n_samples: usize,
    pub error_norm: ErrorNorm,
    pub seed: u64,
    /// Extra time steps for the stability grid; empty means `[base.dt]`.
    pub dt_list: Vec<f64>,
    /// Domains for the cross-scheme study; empty means `[base.lx]`.
    pub lx_list: Vec<f64>,
    pub initial: InitialProfile,
}

impl StudyConfig {
    pub fn new(kind: StudyKind, base: SchemeConfig, ladder: Vec<usize>, seed: u64) -> Self {
        Self {
            kind,
            base,
            ladder,
            n_samples: 1,
            error_norm: ErrorNorm::L2,
            seed,
            dt_list: Vec::new(),
            lx_list: Vec::new(),
            initial: InitialProfile::Gaussian { a: 0.1 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ladder.len() < 2 {
            return Err(SgpeError::Config(
                "study ladder needs at least two levels".into(),
            ));
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SgpeError::Config(
                "study ladder must be strictly increasing".into(),
            ));
        }
        if self.n_samples == 0 {
            return Err(SgpeError::Config("n_samples must be >= 1".into()));
        }
        match self.kind {
            StudyKind::TimeMeansquare => {
                let finest = *self.ladder.last().expect("non-empty ladder");
                for &n in &self.ladder {
                    if finest % n != 0 {
                        return Err(SgpeError::Config(format!(
                            "step count {n} does not divide the finest level {finest}"
                        )));
                    }
                }
            }
            StudyKind::SpacePathwise => {
                if self.ladder.iter().any(|&n| n % 2 != 0 || n < 4) {
                    return Err(SgpeError::Config(
                        "degree-of-freedom ladder entries must be even and >= 4".into(),
                    ));
                }
                if self.base.lx.is_none() {
                    return Err(SgpeError::Config(
                        "space study needs Lx for the grid schemes".into(),
                    ));
                }
            }
            StudyKind::CrossScheme => {
                if self.ladder.iter().any(|&n| n < 4) {
                    return Err(SgpeError::Config(
                        "fourier grid ladder entries must be >= 4".into(),
                    ));
                }
                if self.lx_list.is_empty() && self.base.lx.is_none() {
                    return Err(SgpeError::Config(
                        "cross-scheme study needs lx_list or base Lx".into(),
                    ));
                }
            }
            StudyKind::StabilityVsK => {
                let dts = self.dts();
                let finest = dts.iter().cloned().fold(f64::INFINITY, f64::min);
                for &dt in &dts {
                    let ratio = dt / finest;
                    if (ratio - ratio.round()).abs() > 1e-9 {
                        return Err(SgpeError::Config(format!(
                            "dt = {dt} is not an integer multiple of the finest dt {finest}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn dts(&self) -> Vec<f64> {
        if self.dt_list.is_empty() {
            vec![self.base.dt]
        } else {
            self.dt_list.clone()
        }
    }

    fn lxs(&self) -> Vec<f64> {
        if self.lx_list.is_empty() {
            self.base.lx.into_iter().collect()
        } else {
            self.lx_list.clone()
        }
    }
}

/// One output row. `sample = None` marks an aggregated (mean) row.
#[derive(Clone, Debug)]
pub struct StudyRow {
    pub study_kind: StudyKind,
    pub scheme: String,
    pub k: usize,
    pub dt: f64,
    pub lx: Option<f64>,
    pub alpha: f64,
    pub sample: Option<usize>,
    pub error_sq: f64,
    pub stderr: Option<f64>,
    pub slope: Option<f64>,
    /// `sqrt(dt) * K / 2`, the midpoint off-diagonal size, on stability rows.
    pub diagnostic: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct StudyResult {
    pub kind: StudyKind,
    pub seed: u64,
    pub rows: Vec<StudyRow>,
    /// Fitted log-log slopes per labelled series.
    pub slopes: Vec<(String, f64)>,
}

/// Size of the midpoint operators' stochastic off-diagonal entries relative
/// to 1: the quantity that governs the high-mode accuracy of the implicit
/// scheme.
pub fn stability_diagnostic(k: usize, dt: f64) -> f64 {
    dt.sqrt() * k as f64 / 2.0
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Drop the coarsest level (pre-asymptotic) from the fit window.
    pub drop_coarsest: bool,
    /// Exclude levels with error below this floor (solver-tolerance noise).
    pub floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            drop_coarsest: true,
            floor: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SlopeFit {
    pub slope: f64,
    pub used_points: usize,
    /// Ladder indices excluded by the window policy.
    pub excluded: Vec<usize>,
}

/// Least-squares slope of `log2(error)` against `log2(x)`.
///
/// Levels with non-positive error or below the floor are excluded and
/// flagged; fewer than three usable points is an estimation error.
pub fn fit_order(xs: &[f64], errors: &[f64], opts: &FitOptions) -> Result<SlopeFit> {
    if xs.len() != errors.len() {
        return Err(SgpeError::Contract(format!(
            "fit: {} abscissae vs {} errors",
            xs.len(),
            errors.len()
        )));
    }
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    // index of the coarsest level = largest |log2 x| direction: by
    // convention the first ladder entry.
    for (i, (&x, &e)) in xs.iter().zip(errors).enumerate() {
        if opts.drop_coarsest && i == 0 {
            excluded.push(i);
            continue;
        }
        if !(e > opts.floor) || !x.is_finite() || x <= 0.0 {
            excluded.push(i);
            continue;
        }
        pts.push((x.log2(), e.log2()));
    }
    if pts.len() < 3 {
        return Err(SgpeError::Estimation(format!(
            "only {} usable levels for the order fit (excluded: {:?})",
            pts.len(),
            excluded
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(SgpeError::Estimation(
            "degenerate abscissae in the order fit".into(),
        ));
    }
    Ok(SlopeFit {
        slope: (n * sxy - sx * sy) / denom,
        used_points: pts.len(),
        excluded,
    })
}

/// Squared error between two coefficient vectors, the shorter zero-padded.
pub fn spectral_error_sq(a: &SpectralState, b: &SpectralState, norm: ErrorNorm) -> f64 {
    let n = a.len().max(b.len());
    let zero = Complex64::new(0.0, 0.0);
    (0..n)
        .map(|k| {
            let ca = a.coeffs.get(k).copied().unwrap_or(zero);
            let cb = b.coeffs.get(k).copied().unwrap_or(zero);
            let w = match norm {
                ErrorNorm::L2 => 1.0,
                ErrorNorm::Sigma1 => (2 * k + 1) as f64,
            };
            w * (ca - cb).norm_sqr()
        })
        .sum()
}

/// Uniform evaluation grid shared by cross-discretization comparisons.
pub struct ComparisonGrid {
    pub xs: Vec<f64>,
    pub dx: f64,
}

impl ComparisonGrid {
    pub fn new(x_max: f64, points: usize) -> Self {
        let dx = 2.0 * x_max / (points - 1) as f64;
        let xs = (0..points).map(|j| -x_max + j as f64 * dx).collect();
        Self { xs, dx }
    }

    /// Evaluates any field on the grid: basis synthesis for spectral states,
    /// trigonometric interpolation for periodic grids, linear interpolation
    /// for Dirichlet grids. Grid states are zero outside their own domain.
    pub fn sample(&self, state: &FieldState) -> Result<Vec<Complex64>> {
        match state {
            FieldState::Spectral(s) => {
                let k = s.len();
                self.xs
                    .iter()
                    .map(|&x| {
                        let e = eval_hermite_functions(k - 1, x)?;
                        Ok(s
                            .coeffs
                            .iter()
                            .zip(&e)
                            .map(|(c, &b)| c * b)
                            .sum::<Complex64>())
                    })
                    .collect()
            }
            FieldState::Grid(g) => match g.boundary {
                Boundary::Dirichlet => Ok(self
                    .xs
                    .iter()
                    .map(|&x| linear_interp(g, x))
                    .collect()),
                Boundary::Periodic => {
                    let m = g.values.len();
                    let mut spectrum = g.values.clone();
                    let mut planner = rustfft::FftPlanner::new();
                    planner.plan_fft_forward(m).process(&mut spectrum);
                    Ok(self
                        .xs
                        .iter()
                        .map(|&x| {
                            if x.abs() > g.lx {
                                return Complex64::new(0.0, 0.0);
                            }
                            let mut acc = Complex64::new(0.0, 0.0);
                            for (idx, v) in spectrum.iter().enumerate() {
                                let signed = if idx <= m / 2 {
                                    idx as isize
                                } else {
                                    idx as isize - m as isize
                                };
                                let xi = std::f64::consts::PI * signed as f64 / g.lx;
                                acc += v * Complex64::from_polar(1.0, xi * (x + g.lx));
                            }
                            acc / m as f64
                        })
                        .collect())
                }
            },
        }
    }

    /// Trapezoidal squared error in the requested norm between two sampled
    /// fields; the Sobolev variant adds central-difference derivative and
    /// moment terms.
    pub fn error_sq(&self, a: &[Complex64], b: &[Complex64], norm: ErrorNorm) -> f64 {
        let n = self.xs.len();
        let diff: Vec<Complex64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
        let w = |j: usize| if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        let l2: f64 = diff
            .iter()
            .enumerate()
            .map(|(j, d)| w(j) * d.norm_sqr())
            .sum::<f64>()
            * self.dx;
        match norm {
            ErrorNorm::L2 => l2,
            ErrorNorm::Sigma1 => {
                let mut grad = 0.0;
                for j in 0..n {
                    let d = if j == 0 {
                        (diff[1] - diff[0]) / self.dx
                    } else if j == n - 1 {
                        (diff[n - 1] - diff[n - 2]) / self.dx
                    } else {
                        (diff[j + 1] - diff[j - 1]) / (2.0 * self.dx)
                    };
                    grad += w(j) * d.norm_sqr();
                }
                let moment: f64 = diff
                    .iter()
                    .enumerate()
                    .map(|(j, d)| w(j) * self.xs[j] * self.xs[j] * d.norm_sqr())
                    .sum();
                (grad + moment) * self.dx
            }
        }
    }
}

fn linear_interp(g: &GridState, x: f64) -> Complex64 {
    if x.abs() >= g.lx {
        return Complex64::new(0.0, 0.0);
    }
    let dx = g.dx();
    let pos = (x + g.lx) / dx;
    let j = pos.floor() as usize;
    let frac = pos - j as f64;
    if j + 1 >= g.values.len() {
        return g.values[g.values.len() - 1];
    }
    g.values[j] * (1.0 - frac) + g.values[j + 1] * frac
}

const COMPARISON_POINTS: usize = 2048;

/// Runs the study matching `cfg.kind`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    match cfg.kind {
        StudyKind::SpacePathwise => run_space_pathwise(cfg),
        StudyKind::CrossScheme => run_cross_scheme(cfg),
        StudyKind::TimeMeansquare => run_time_meansquare(cfg),
        StudyKind::StabilityVsK => run_stability_vs_k(cfg),
    }
}

fn level_config(base: &SchemeConfig, scheme: SchemeKind, dof: usize) -> SchemeConfig {
    let mut cfg = base.clone();
    cfg.scheme = scheme;
    cfg.k = match scheme {
        SchemeKind::CnHermite | SchemeKind::SplitHermite => dof,
        SchemeKind::SplitFourier => dof,
        // 2K+1 grid points, matching the ladder's degree-of-freedom count
        SchemeKind::CnFd => dof / 2,
    };
    cfg
}

fn evolve_final(cfg: &SchemeConfig, path: &BrownianPath, initial: FieldState) -> Result<FieldState> {
    let Trajectory { final_state, .. } = evolve(cfg, path, initial)?;
    Ok(final_state)
}

/// Successive-resolution pathwise errors for all four schemes on one
/// shared trajectory (damped noise makes the spatial error dominate).
fn run_space_pathwise(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    if cfg.kind != StudyKind::SpacePathwise {
        return Err(SgpeError::Contract("wrong study kind".into()));
    }
    let path = BrownianPath::generate(derive_seed(cfg.seed, 0), cfg.base.t_final, cfg.base.dt)?;
    let grid = ComparisonGrid::new(cfg.base.lx.expect("validated"), COMPARISON_POINTS);

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let schemes = [
        SchemeKind::CnHermite,
        SchemeKind::SplitHermite,
        SchemeKind::SplitFourier,
        SchemeKind::CnFd,
    ];
    for scheme in schemes {
        let finals: Vec<FieldState> = cfg
            .ladder
            .par_iter()
            .map(|&dof| {
                let level = level_config(&cfg.base, scheme, dof);
                level.validate()?;
                let initial = cfg.initial.build(&level)?;
                evolve_final(&level, &path, initial)
            })
            .collect::<Result<_>>()?;
        let mut xs = Vec::new();
        let mut errs = Vec::new();
        for (i, pair) in finals.windows(2).enumerate() {
            let err_sq = match (&pair[0], &pair[1]) {
                (FieldState::Spectral(a), FieldState::Spectral(b)) => {
                    spectral_error_sq(a, b, cfg.error_norm)
                }
                _ => {
                    let a = grid.sample(&pair[0])?;
                    let b = grid.sample(&pair[1])?;
                    grid.error_sq(&a, &b, cfg.error_norm)
                }
            };
            let dof = cfg.ladder[i + 1];
            rows.push(StudyRow {
                study_kind: cfg.kind,
                scheme: scheme.name().into(),
                k: dof,
                dt: cfg.base.dt,
                lx: match scheme {
                    SchemeKind::SplitFourier | SchemeKind::CnFd => cfg.base.lx,
                    _ => None,
                },
                alpha: cfg.base.alpha,
                sample: None,
                error_sq: err_sq,
                stderr: None,
                slope: None,
                diagnostic: None,
            });
            xs.push(1.0 / dof as f64);
            errs.push(err_sq.sqrt());
        }
        if let Ok(fit) = fit_order(&xs, &errs, &FitOptions::default()) {
            for row in rows.iter_mut().rev().take(errs.len()) {
                row.slope = Some(fit.slope);
            }
            slopes.push((scheme.name().to_string(), fit.slope));
        }
    }
    Ok(StudyResult {
        kind: cfg.kind,
        seed: cfg.seed,
        rows,
        slopes,
    })
}

/// Fourier solutions on several domains against the fine Hermite reference,
/// plus Hermite-splitting yardstick rows sharing the reference's time grid.
fn run_cross_scheme(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    if cfg.kind != StudyKind::CrossScheme {
        return Err(SgpeError::Contract("wrong study kind".into()));
    }
    let path = BrownianPath::generate(derive_seed(cfg.seed, 0), cfg.base.t_final, cfg.base.dt)?;
    let lxs = cfg.lxs();
    let x_max = lxs.iter().cloned().fold(0.0f64, f64::max).max(10.0);
    let grid = ComparisonGrid::new(x_max, COMPARISON_POINTS);

    let mut reference_cfg = cfg.base.clone();
    reference_cfg.scheme = SchemeKind::CnHermite;
    reference_cfg.validate()?;
    let reference =
        evolve_final(&reference_cfg, &path, cfg.initial.build(&reference_cfg)?)?;
    let reference_samples = grid.sample(&reference)?;

    let mut rows = Vec::new();
    // self-comparison row: the reference against itself
    rows.push(StudyRow {
        study_kind: cfg.kind,
        scheme: SchemeKind::CnHermite.name().into(),
        k: reference_cfg.k,
        dt: cfg.base.dt,
        lx: None,
        alpha: cfg.base.alpha,
        sample: None,
        error_sq: 0.0,
        stderr: None,
        slope: None,
        diagnostic: None,
    });

    // Hermite-splitting yardstick at the reference resolution: isolates the
    // time-discretization gap that bounds what Fourier can reach.
    {
        let mut split_cfg = reference_cfg.clone();
        split_cfg.scheme = SchemeKind::SplitHermite;
        let split = evolve_final(&split_cfg, &path, cfg.initial.build(&split_cfg)?)?;
        let err_sq = match (&reference, &split) {
            (FieldState::Spectral(a), FieldState::Spectral(b)) => {
                spectral_error_sq(a, b, cfg.error_norm)
            }
            _ => unreachable!("both spectral"),
        };
        rows.push(StudyRow {
            study_kind: cfg.kind,
            scheme: SchemeKind::SplitHermite.name().into(),
            k: split_cfg.k,
            dt: cfg.base.dt,
            lx: None,
            alpha: cfg.base.alpha,
            sample: None,
            error_sq: err_sq,
            stderr: None,
            slope: None,
            diagnostic: None,
        });
    }

    let mut slopes = Vec::new();
    for &lx in &lxs {
        let finals: Vec<FieldState> = cfg
            .ladder
            .par_iter()
            .map(|&points| {
                let mut level = cfg.base.clone();
                level.scheme = SchemeKind::SplitFourier;
                level.k = points;
                level.lx = Some(lx);
                level.validate()?;
                let initial = cfg.initial.build(&level)?;
                evolve_final(&level, &path, initial)
            })
            .collect::<Result<_>>()?;
        let mut xs = Vec::new();
        let mut errs = Vec::new();
        for (i, state) in finals.iter().enumerate() {
            let samples = grid.sample(state)?;
            let err_sq = grid.error_sq(&samples, &reference_samples, cfg.error_norm);
            rows.push(StudyRow {
                study_kind: cfg.kind,
                scheme: SchemeKind::SplitFourier.name().into(),
                k: cfg.ladder[i],
                dt: cfg.base.dt,
                lx: Some(lx),
                alpha: cfg.base.alpha,
                sample: None,
                error_sq: err_sq,
                stderr: None,
                slope: None,
                diagnostic: None,
            });
            xs.push(1.0 / cfg.ladder[i] as f64);
            errs.push(err_sq.sqrt());
        }
        if let Ok(fit) = fit_order(&xs, &errs, &FitOptions::default()) {
            slopes.push((format!("split_fourier lx={lx}"), fit.slope));
        }
    }
    Ok(StudyResult {
        kind: cfg.kind,
        seed: cfg.seed,
        rows,
        slopes,
    })
}

/// Mean-square error between successive time steps over coupled samples,
/// for the midpoint and splitting Hermite schemes.
fn run_time_meansquare(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    if cfg.kind != StudyKind::TimeMeansquare {
        return Err(SgpeError::Contract("wrong study kind".into()));
    }
    let finest = *cfg.ladder.last().expect("validated");
    let t = cfg.base.t_final;
    let schemes = [SchemeKind::CnHermite, SchemeKind::SplitHermite];
    let n_pairs = cfg.ladder.len() - 1;

    // per sample: errors[scheme][pair]
    let per_sample: Vec<Vec<Vec<f64>>> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|sample| {
            let path =
                BrownianPath::generate(derive_seed(cfg.seed, sample as u64), t, t / finest as f64)?;
            // coupling sanity: every level consumes the same trajectory
            let total = path.total_increment();
            let mut out = Vec::with_capacity(schemes.len());
            for scheme in schemes {
                let mut level_cfg = cfg.base.clone();
                level_cfg.scheme = scheme;
                let mut finals = Vec::with_capacity(cfg.ladder.len());
                for &steps in &cfg.ladder {
                    level_cfg.dt = t / steps as f64;
                    level_cfg.validate()?;
                    let coarse = path.coarsen(finest / steps)?;
                    if (coarse.total_increment() - total).abs() > 1e-12 {
                        return Err(SgpeError::Numeric(
                            "coupled coarsening lost the path sum".into(),
                        ));
                    }
                    let initial = cfg.initial.build(&level_cfg)?;
                    finals.push(evolve_final(&level_cfg, &coarse, initial)?);
                }
                let errs: Vec<f64> = finals
                    .windows(2)
                    .map(|pair| match (&pair[0], &pair[1]) {
                        (FieldState::Spectral(a), FieldState::Spectral(b)) => {
                            spectral_error_sq(a, b, cfg.error_norm)
                        }
                        _ => unreachable!("hermite schemes produce spectral states"),
                    })
                    .collect();
                out.push(errs);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (si, scheme) in schemes.iter().enumerate() {
        let mut xs = Vec::new();
        let mut means = Vec::new();
        for pair in 0..n_pairs {
            // pairs are indexed by the finer step of the two
            let dt_pair = t / cfg.ladder[pair + 1] as f64;
            let samples: Vec<f64> = per_sample.iter().map(|s| s[si][pair]).collect();
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            let var = if samples.len() > 1 {
                samples.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                    / (samples.len() - 1) as f64
            } else {
                0.0
            };
            let stderr = (var / samples.len() as f64).sqrt();
            for (s, &err_sq) in samples.iter().enumerate() {
                rows.push(StudyRow {
                    study_kind: cfg.kind,
                    scheme: scheme.name().into(),
                    k: cfg.base.k,
                    dt: dt_pair,
                    lx: None,
                    alpha: cfg.base.alpha,
                    sample: Some(s),
                    error_sq: err_sq,
                    stderr: None,
                    slope: None,
                    diagnostic: None,
                });
            }
            rows.push(StudyRow {
                study_kind: cfg.kind,
                scheme: scheme.name().into(),
                k: cfg.base.k,
                dt: dt_pair,
                lx: None,
                alpha: cfg.base.alpha,
                sample: None,
                error_sq: mean,
                stderr: Some(stderr),
                slope: None,
                diagnostic: None,
            });
            xs.push(dt_pair);
            means.push(mean);
        }
        let floor_sq = (1e3 * cfg.base.fp_tol) * (1e3 * cfg.base.fp_tol);
        if let Ok(fit) = fit_order(
            &xs,
            &means,
            &FitOptions {
                drop_coarsest: true,
                floor: floor_sq,
            },
        ) {
            for row in rows
                .iter_mut()
                .filter(|r| r.scheme == scheme.name() && r.sample.is_none())
            {
                row.slope = Some(fit.slope);
            }
            slopes.push((scheme.name().to_string(), fit.slope));
        }
    }
    Ok(StudyResult {
        kind: cfg.kind,
        seed: cfg.seed,
        rows,
        slopes,
    })
}

/// Mean-square midpoint-vs-splitting gap over a (modes, dt) grid with
/// coupled noise, with the `sqrt(dt) K / 2` diagnostic per cell.
fn run_stability_vs_k(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    if cfg.kind != StudyKind::StabilityVsK {
        return Err(SgpeError::Contract("wrong study kind".into()));
    }
    let dts = cfg.dts();
    let finest = dts.iter().cloned().fold(f64::INFINITY, f64::min);
    let t = cfg.base.t_final;

    // per sample: gap[k_index][dt_index]
    let per_sample: Vec<Vec<Vec<f64>>> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|sample| {
            let path = BrownianPath::generate(derive_seed(cfg.seed, sample as u64), t, finest)?;
            let mut gaps = Vec::with_capacity(cfg.ladder.len());
            for &k in &cfg.ladder {
                let mut per_dt = Vec::with_capacity(dts.len());
                for &dt in &dts {
                    let mut cn_cfg = cfg.base.clone();
                    cn_cfg.scheme = SchemeKind::CnHermite;
                    cn_cfg.k = k;
                    cn_cfg.dt = dt;
                    cn_cfg.validate()?;
                    let mut split_cfg = cn_cfg.clone();
                    split_cfg.scheme = SchemeKind::SplitHermite;
                    let factor = (dt / finest).round() as usize;
                    let coarse = path.coarsen(factor)?;
                    let cn = evolve_final(&cn_cfg, &coarse, cfg.initial.build(&cn_cfg)?)?;
                    let split =
                        evolve_final(&split_cfg, &coarse, cfg.initial.build(&split_cfg)?)?;
                    let gap = match (&cn, &split) {
                        (FieldState::Spectral(a), FieldState::Spectral(b)) => {
                            spectral_error_sq(a, b, cfg.error_norm)
                        }
                        _ => unreachable!("hermite schemes produce spectral states"),
                    };
                    per_dt.push(gap);
                }
                gaps.push(per_dt);
            }
            Ok(gaps)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for (ki, &k) in cfg.ladder.iter().enumerate() {
        for (di, &dt) in dts.iter().enumerate() {
            let samples: Vec<f64> = per_sample.iter().map(|s| s[ki][di]).collect();
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            let var = if samples.len() > 1 {
                samples.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>()
                    / (samples.len() - 1) as f64
            } else {
                0.0
            };
            let stderr = (var / samples.len() as f64).sqrt();
            for (s, &gap) in samples.iter().enumerate() {
                rows.push(StudyRow {
                    study_kind: cfg.kind,
                    scheme: "cn_vs_split".into(),
                    k,
                    dt,
                    lx: None,
                    alpha: cfg.base.alpha,
                    sample: Some(s),
                    error_sq: gap,
                    stderr: None,
                    slope: None,
                    diagnostic: Some(stability_diagnostic(k, dt)),
                });
            }
            rows.push(StudyRow {
                study_kind: cfg.kind,
                scheme: "cn_vs_split".into(),
                k,
                dt,
                lx: None,
                alpha: cfg.base.alpha,
                sample: None,
                error_sq: mean,
                stderr: Some(stderr),
                slope: None,
                diagnostic: Some(stability_diagnostic(k, dt)),
            });
        }
    }
    // growth-in-K slope per dt column
    for (di, &dt) in dts.iter().enumerate() {
        let xs: Vec<f64> = cfg.ladder.iter().map(|&k| k as f64).collect();
        let means: Vec<f64> = (0..cfg.ladder.len())
            .map(|ki| {
                per_sample.iter().map(|s| s[ki][di]).sum::<f64>() / cfg.n_samples as f64
            })
            .collect();
        if let Ok(fit) = fit_order(
            &xs,
            &means,
            &FitOptions {
                drop_coarsest: false,
                floor: 0.0,
            },
        ) {
            slopes.push((format!("cn_vs_split dt={dt}"), fit.slope));
        }
    }
    Ok(StudyResult {
        kind: cfg.kind,
        seed: cfg.seed,
        rows,
        slopes,
    })
}
