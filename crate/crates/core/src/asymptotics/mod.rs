//! The far-field expansion `½xᵀAx + b·x + c + d·ln(xᵀPx) + (d₁y₁ + d₂y₂)/|y|²`
//! with `y = P^{1/2}x`: evaluation, manufactured right-hand sides, and fits of
//! sampled solutions.

mod expansion;
mod fit;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ftau::FtauError;
use crate::linalg::{SymMat2, Vec2};
use crate::lstsq::LstsqError;
use crate::poisson::PoissonError;
use crate::scalar::Real;

pub use expansion::{
    eigen_shift, expansion_gradient, expansion_hessian, expansion_value, manufacture_rhs, Expansion, Manufactured,
};
pub use fit::{
    decay_fit, fit_expansion, fit_expansion_scaled, fit_radial, theorem_rate, DecayFit, FitReport, RateOrder,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error("SINGULAR_P: P has smallest eigenvalue {lam1}; it must be positive definite")]
    SingularP { lam1: f64 },
    #[error("INVALID_INPUT: {0}")]
    InvalidInput(String),
    #[error("WINDOW_TOO_NARROW: window [{r_lo}, {r_hi}] must span a factor {min_ratio} inside the sampled radii")]
    WindowTooNarrow { r_lo: f64, r_hi: f64, min_ratio: f64 },
    #[error("ILL_CONDITIONED: {0}")]
    IllConditioned(String),
    #[error("OUT_OF_RANGE: zeta = {zeta} must exceed {min} for the {order} rate")]
    OutOfRange { zeta: f64, min: f64, order: &'static str },
    #[error(transparent)]
    Ftau(#[from] FtauError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
}

impl From<LstsqError> for AsymptoticsError {
    fn from(e: LstsqError) -> Self {
        AsymptoticsError::IllConditioned(e.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoticCoefficients<T> {
    pub a: SymMat2<T>,
    pub b: Vec2<T>,
    pub c: T,
    pub d: T,
    pub d1: T,
    pub d2: T,
}

impl<T: Real> AsymptoticCoefficients<T> {
    /// Pure quadratic `½xᵀAx`.
    pub fn quadratic(a: SymMat2<T>) -> Self {
        Self {
            a,
            b: [T::zero(); 2],
            c: T::zero(),
            d: T::zero(),
            d1: T::zero(),
            d2: T::zero(),
        }
    }

    /// Largest relative deviation over the six coefficient groups, each
    /// measured against `max(|reference|, floor)`.
    pub fn max_relative_error(&self, reference: &Self, floor: T) -> T {
        let rel = |x: T, r: T| (x - r).abs() / r.abs().max(floor);
        let a = (self.a - reference.a).max_abs() / reference.a.max_abs().max(floor);
        let b = (self.b[0] - reference.b[0]).hypot(self.b[1] - reference.b[1])
            / reference.b[0].hypot(reference.b[1]).max(floor);
        let dv = (self.d1 - reference.d1).hypot(self.d2 - reference.d2) / reference.d1.hypot(reference.d2).max(floor);
        [a, b, rel(self.c, reference.c), rel(self.d, reference.d), dv]
            .into_iter()
            .fold(T::zero(), |m, v| m.max(v))
    }
}

/// Flat JSON form of a [`FitReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    #[serde(rename = "A11")]
    pub a11: f64,
    #[serde(rename = "A12")]
    pub a12: f64,
    #[serde(rename = "A22")]
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub c: f64,
    pub d: f64,
    pub d1: f64,
    pub d2: f64,
    pub residual_p: Option<f64>,
    pub residual_q: Option<f64>,
    pub condition: f64,
    pub r_lo: f64,
    pub r_hi: f64,
}
