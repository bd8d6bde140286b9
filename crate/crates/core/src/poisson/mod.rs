//! Exterior Poisson problem `Δv = g` on `|x| > 1` by circle-harmonic
//! decomposition and per-mode Wronskian quadrature.

mod decay;
mod grid;
mod modes;
mod solver;

use thiserror::Error;

pub use decay::{log_power_fit, measure_decay_class, measure_field_decay, DecayClass, LogPowerFit, MeasuredDecay};
pub use grid::{circle_norms, laplacian_residual, radial_derivative, AnnulusGrid, ScalarField};
pub use modes::{assemble, fourier_decompose, FourierModes};
pub use solver::{
    endpoint_policy, mode_particular_solution, solve_poisson, Anchor, Endpoint, EndpointPolicy, PoissonOptions,
    PoissonSolution,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error("INVALID_GRID: {0}")]
    InvalidGrid(String),
    #[error("SHAPE_MISMATCH: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("GRID_MISMATCH: fields live on different grids")]
    GridMismatch,
    #[error("ALIASING: k_max = {k_max} must be below n_theta/2 = {}", n_theta / 2)]
    Aliasing { k_max: usize, n_theta: usize },
    #[error("GRID_TOO_COARSE: stencil needs n_r >= 3 and n_theta >= 4, got {n_r} x {n_theta}")]
    GridTooCoarse { n_r: usize, n_theta: usize },
    #[error("ILL_CONDITIONED: radii span [{r_lo}, {r_hi}] must exceed a factor 10 with r > 1")]
    IllConditioned { r_lo: f64, r_hi: f64 },
    #[error("TOO_FEW_SAMPLES: {found} samples, need {needed}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("ZERO_SIGNAL: samples vanish or are not finite, so no decay class exists")]
    ZeroSignal,
    #[error("INVALID_CLASS: decay class needs k1 > 0 and k2 >= 0, got ({k1}, {k2})")]
    InvalidClass { k1: f64, k2: f64 },
    #[error("TAIL_DIVERGENT: mode k = {k} has tail exponent {q}, so the {integral} integral diverges at infinity")]
    TailDivergent { k: usize, q: f64, integral: &'static str },
    #[error("NO_SUCH_MODE: (k, m) = ({k}, {m})")]
    NoSuchMode { k: usize, m: usize },
}
