//! Simulation library for the one-dimensional Gross-Pitaevskii equation with
//! white-noise-in-time fluctuations of the harmonic trap.
//!
//! The crate provides a Crank-Nicolson integrator on a Hermite-function
//! spectral basis, three comparison integrators (Hermite and Fourier
//! splitting, Crank-Nicolson finite differences), reproducible Brownian
//! driving paths with coupled coarsening, and Monte Carlo study harnesses
//! that measure stability and convergence orders.

pub mod error;
pub mod experiments;
pub mod hermite;
pub(crate) mod linalg;
pub mod nonlinearity;
pub mod operators;
pub mod schemes;
pub mod stochastic;

#[cfg(test)]
pub(crate) mod test_support;

pub use error::{Result, SgpeError};
pub use experiments::{
    run_study, ErrorNorm, InitialProfile, StudyConfig, StudyKind, StudyResult, StudyRow,
};
pub use hermite::{
    eval_hermite_functions, gaussian_profile, gaussian_state, HermiteBasis, SpectralState,
};
pub use nonlinearity::{g_pointwise, CutoffProfile, CutoffShape, NonlinearEvaluator};
pub use operators::{apply_a, BandedOperator, OperatorKind};
pub use schemes::{
    evolve, BChoice, Boundary, FieldState, GridState, SchemeConfig, SchemeKind, Trajectory,
};
pub use stochastic::BrownianPath;
