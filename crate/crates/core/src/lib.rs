//! Numerics for the 2-D equations `F_τ(λ(D²u)) = f` whose solutions have
//! gradient graphs of prescribed mean curvature: the operator family itself,
//! an exterior Poisson solver, a radial integrator, and fits of solutions to
//! their far-field expansion.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! `*64`/`*32` aliases below fix the scalar.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod ftau;
pub mod io;
pub mod linalg;
pub mod lstsq;
pub mod poisson;
pub mod quadrature;
pub mod radial;
pub mod scalar;
pub mod suite;

pub use asymptotics::{AsymptoticCoefficients, AsymptoticsError, FitReport};
pub use ftau::{Branch, FtauError, TauParams};
pub use linalg::{Spectrum, SymMat2};
pub use poisson::{AnnulusGrid, PoissonError, ScalarField};
pub use radial::{RadialError, RadialProfile};
pub use scalar::Real;

pub type TauParams64 = TauParams<f64>;
pub type TauParams32 = TauParams<f32>;
pub type SymMat64 = SymMat2<f64>;
pub type SymMat32 = SymMat2<f32>;
pub type Grid64 = AnnulusGrid<f64>;
pub type Grid32 = AnnulusGrid<f32>;
pub type Field64 = ScalarField<f64>;
pub type Field32 = ScalarField<f32>;
pub type Profile64 = RadialProfile<f64>;
pub type Profile32 = RadialProfile<f32>;
pub type Coefficients64 = AsymptoticCoefficients<f64>;
pub type Coefficients32 = AsymptoticCoefficients<f32>;
