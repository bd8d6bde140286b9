//! The five-branch operator family `F_τ` acting on Hessian eigenvalues of a
//! planar gradient graph, its derivative, the expansion matrix `P`, the
//! attainable value range, and the calibration of quadratic parts.
//!
//! For `n = 2`, with `a = cot τ` and `b = √|cot²τ − 1|`:
//!
//! | branch         | τ           | per-eigenvalue term                              |
//! |----------------|-------------|--------------------------------------------------|
//! | `MongeAmpere`  | 0           | `½ ln λ`                                         |
//! | `SubQuarter`   | (0, π/4)    | `√(a²+1)/(2b) · ln((λ+a−b)/(λ+a+b))`             |
//! | `Quarter`      | π/4         | `−√2 / (1+λ)`                                    |
//! | `SuperQuarter` | (π/4, π/2)  | `√(a²+1)/b · arctan((λ+a−b)/(λ+a+b))`            |
//! | `SpecialLagrangian` | π/2    | `arctan λ`                                       |
//!
//! `F_τ(λ₁, λ₂)` is the sum of the two terms. Every branch has the common
//! derivative `1 / (sin τ·λ² + 2 cos τ·λ + sin τ)`.

use std::fmt;

use thiserror::Error;

use crate::linalg::{Mat2, Spectrum, SymMat2, Vec2};
use crate::scalar::Real;

const BREAKPOINT_SNAP: f64 = 1e-12;
const CALIBRATION_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 200;
const BRACKET_OFFSET: f64 = 1e-10;
const BRACKET_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FtauError {
    #[error("OUT_OF_RANGE: tau = {tau} lies outside [0, pi/2]")]
    TauOutOfRange { tau: f64 },
    #[error("DOMAIN_VIOLATION: eigenvalue lambda{index} = {value} is not above the semi-convex bound {bound}")]
    DomainViolation { index: usize, value: f64, bound: f64 },
    #[error("NOT_POSITIVE_DEFINITE: smallest eigenvalue of P is {lam1}")]
    NotPositiveDefinite { lam1: f64 },
    #[error("OUT_OF_RANGE: f_inf = {value} is not interior to the attainable range ({lo}, {hi})")]
    ValueOutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("NO_ROOT: no admissible eigenvalue gives F = {target} with the other eigenvalue fixed at {fixed}")]
    NoRoot { target: f64, fixed: f64 },
    #[error("INADMISSIBLE_INPUT: {0}")]
    InadmissibleInput(String),
    #[error("WRONG_BRANCH: operation requires {expected}, got {actual}")]
    WrongBranch { expected: Branch, actual: Branch },
}

/// Regime of the `F_τ` family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    MongeAmpere,
    SubQuarter,
    Quarter,
    SuperQuarter,
    SpecialLagrangian,
}

impl Branch {
    pub const ALL: [Branch; 5] = [
        Branch::MongeAmpere,
        Branch::SubQuarter,
        Branch::Quarter,
        Branch::SuperQuarter,
        Branch::SpecialLagrangian,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Branch::MongeAmpere => "MA",
            Branch::SubQuarter => "SUBQUARTER",
            Branch::Quarter => "QUARTER",
            Branch::SuperQuarter => "SUPERQUARTER",
            Branch::SpecialLagrangian => "SPL",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Regime scalars of `F_τ`.
///
/// `a` and `b_coef` are `+∞` on the Monge–Ampère branch, where they are
/// never used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauParams<T> {
    tau: T,
    a: T,
    b: T,
    /// `a − b`, kept separately because it cancels badly for small τ.
    a_minus_b: T,
    sin: T,
    cos: T,
    branch: Branch,
}

impl<T: Real> TauParams<T> {
    pub fn new(tau: T) -> Result<Self, FtauError> {
        let snap = T::lit(BREAKPOINT_SNAP);
        let quarter = T::FRAC_PI_4();
        let half = T::FRAC_PI_2();
        if !(tau >= -snap && tau <= half + snap) {
            return Err(FtauError::TauOutOfRange { tau: tau.as_f64() });
        }
        if tau.abs() < snap {
            return Ok(Self::monge_ampere());
        }
        if (tau - quarter).abs() < snap {
            return Ok(Self::quarter());
        }
        if (tau - half).abs() < snap {
            return Ok(Self::special_lagrangian());
        }
        let (sin, cos) = tau.sin_cos();
        let a = cos / sin;
        let b = (a * a - T::one()).abs().sqrt();
        let (branch, a_minus_b) = if tau < quarter {
            // a² − b² = 1 on this branch
            (Branch::SubQuarter, (a + b).recip())
        } else {
            (Branch::SuperQuarter, a - b)
        };
        Ok(Self {
            tau,
            a,
            b,
            a_minus_b,
            sin,
            cos,
            branch,
        })
    }

    pub fn monge_ampere() -> Self {
        Self {
            tau: T::zero(),
            a: T::infinity(),
            b: T::infinity(),
            a_minus_b: T::zero(),
            sin: T::zero(),
            cos: T::one(),
            branch: Branch::MongeAmpere,
        }
    }

    pub fn quarter() -> Self {
        Self {
            tau: T::FRAC_PI_4(),
            a: T::one(),
            b: T::zero(),
            a_minus_b: T::one(),
            sin: T::FRAC_1_SQRT_2(),
            cos: T::FRAC_1_SQRT_2(),
            branch: Branch::Quarter,
        }
    }

    pub fn special_lagrangian() -> Self {
        Self {
            tau: T::FRAC_PI_2(),
            a: T::zero(),
            b: T::one(),
            a_minus_b: -T::one(),
            sin: T::one(),
            cos: T::zero(),
            branch: Branch::SpecialLagrangian,
        }
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    /// `cot τ`.
    pub fn a(&self) -> T {
        self.a
    }

    /// `√|cot²τ − 1|`.
    pub fn b_coef(&self) -> T {
        self.b
    }

    pub fn sin_tau(&self) -> T {
        self.sin
    }

    pub fn cos_tau(&self) -> T {
        self.cos
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// `√(a²+1) = 1/sin τ`, the normalisation of the two interior branches.
    fn interior_scale(&self) -> T {
        self.sin.recip()
    }

    /// Strict lower bound on Hessian eigenvalues in the semi-convex case.
    pub fn semiconvex_lower_bound(&self) -> T {
        match self.branch {
            Branch::MongeAmpere => T::zero(),
            Branch::SubQuarter => -self.a_minus_b,
            Branch::Quarter => -T::one(),
            Branch::SuperQuarter => -(self.a + self.b),
            Branch::SpecialLagrangian => T::neg_infinity(),
        }
    }

    pub fn is_admissible(&self, lam: T) -> bool {
        lam > self.semiconvex_lower_bound() && lam.is_finite()
    }

    /// Checks both eigenvalues against the semi-convex bound before anything
    /// is evaluated.
    pub fn check_admissible(&self, lam: [T; 2]) -> Result<(), FtauError> {
        for (i, &l) in lam.iter().enumerate() {
            self.check_one(i + 1, l)?;
        }
        Ok(())
    }

    fn check_one(&self, index: usize, lam: T) -> Result<(), FtauError> {
        if self.is_admissible(lam) {
            Ok(())
        } else {
            Err(FtauError::DomainViolation {
                index,
                value: lam.as_f64(),
                bound: self.semiconvex_lower_bound().as_f64(),
            })
        }
    }

    /// Per-eigenvalue contribution to `F_τ`; no domain check.
    pub fn term(&self, lam: T) -> T {
        match self.branch {
            Branch::MongeAmpere => T::half() * lam.ln(),
            Branch::SubQuarter => {
                let s = self.interior_scale() / (T::two() * self.b);
                let outer = lam + self.a + self.b;
                let ratio = (lam + self.a_minus_b) / outer;
                // ln_1p form far from the bound, the plain ratio near it
                if ratio < T::half() {
                    s * ratio.ln()
                } else {
                    s * (-(T::two() * self.b) / outer).ln_1p()
                }
            }
            Branch::Quarter => -T::SQRT_2() / (T::one() + lam),
            Branch::SuperQuarter => {
                let s = self.interior_scale() / self.b;
                s * ((lam + self.a_minus_b) / (lam + self.a + self.b)).atan()
            }
            Branch::SpecialLagrangian => lam.atan(),
        }
    }

    /// `term(lam + dx) − term(lam)` evaluated without cancellation.
    pub fn term_increment(&self, lam: T, dx: T) -> T {
        match self.branch {
            Branch::MongeAmpere => T::half() * (dx / lam).ln_1p(),
            Branch::SubQuarter => {
                let s = self.interior_scale() / (T::two() * self.b);
                s * ((dx / (lam + self.a_minus_b)).ln_1p() - (dx / (lam + self.a + self.b)).ln_1p())
            }
            Branch::Quarter => T::SQRT_2() * dx / ((T::one() + lam) * (T::one() + lam + dx)),
            Branch::SuperQuarter => {
                let s = self.interior_scale() / self.b;
                let q = (lam + self.a) / self.b;
                s * atan_increment(q, dx / self.b)
            }
            Branch::SpecialLagrangian => atan_increment(lam, dx),
        }
    }

    /// Derivative of [`term`](Self::term) in the unified form.
    pub fn term_derivative(&self, lam: T) -> T {
        (self.sin * lam * lam + T::two() * self.cos * lam + self.sin).recip()
    }

    /// Derivative of [`term`](Self::term) from each branch's own closed form.
    /// Kept separate from the unified form so the two can be compared.
    pub fn branch_derivative(&self, lam: T) -> T {
        match self.branch {
            Branch::MongeAmpere => (T::two() * lam).recip(),
            Branch::SubQuarter => {
                let shifted = lam + self.a;
                self.interior_scale() / ((lam + self.a_minus_b) * (shifted + self.b))
            }
            Branch::Quarter => T::SQRT_2() / ((T::one() + lam) * (T::one() + lam)),
            Branch::SuperQuarter => {
                let shifted = lam + self.a;
                self.interior_scale() / (shifted * shifted + self.b * self.b)
            }
            Branch::SpecialLagrangian => (T::one() + lam * lam).recip(),
        }
    }

    /// Open interval of values `F_τ` attains over semi-convex matrices.
    pub fn attainable_range(&self) -> AdmissibleRange<T> {
        let (lo, hi) = match self.branch {
            Branch::MongeAmpere => (T::neg_infinity(), T::infinity()),
            Branch::SubQuarter | Branch::Quarter => (T::neg_infinity(), T::zero()),
            Branch::SuperQuarter => {
                let s = self.interior_scale() / self.b;
                (-T::PI() * s, T::FRAC_PI_2() * s)
            }
            Branch::SpecialLagrangian => (-T::PI(), T::PI()),
        };
        AdmissibleRange {
            lo,
            hi,
            open_lo: true,
            open_hi: true,
        }
    }
}

/// `arctan p − arctan q` without cancellation.
/// `arctan(q + dq) − arctan(q)` with the difference passed in exactly.
fn atan_increment<T: Real>(q: T, dq: T) -> T {
    dq.atan2(T::one() + q * (q + dq))
}

/// Interval of attainable operator values; both ends are open for every branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibleRange<T> {
    pub lo: T,
    pub hi: T,
    pub open_lo: bool,
    pub open_hi: bool,
}

impl<T: Real> AdmissibleRange<T> {
    pub fn contains_interior(&self, v: T) -> bool {
        v > self.lo && v < self.hi
    }
}

pub fn tau_params<T: Real>(tau: T) -> Result<TauParams<T>, FtauError> {
    TauParams::new(tau)
}

pub fn eigs<T: Real>(m: &SymMat2<T>) -> Spectrum<T> {
    m.eigs()
}

pub fn semiconvex_lower_bound<T: Real>(p: &TauParams<T>) -> T {
    p.semiconvex_lower_bound()
}

/// `F_τ(λ₁, λ₂)`.
pub fn f_tau<T: Real>(lam: [T; 2], p: &TauParams<T>) -> Result<T, FtauError> {
    p.check_admissible(lam)?;
    Ok(p.term(lam[0]) + p.term(lam[1]))
}

/// `F_τ(λ(M))`.
pub fn f_tau_mat<T: Real>(m: &SymMat2<T>, p: &TauParams<T>) -> Result<T, FtauError> {
    f_tau(m.eigs().eigenvalues(), p)
}

/// `F_τ(λ + δ) − F_τ(λ)`, accurate when δ is tiny relative to λ.
pub fn f_tau_increment<T: Real>(base: [T; 2], delta: [T; 2], p: &TauParams<T>) -> Result<T, FtauError> {
    p.check_admissible(base)?;
    p.check_admissible([base[0] + delta[0], base[1] + delta[1]])?;
    Ok(p.term_increment(base[0], delta[0]) + p.term_increment(base[1], delta[1]))
}

/// Derivative of `F_τ` in one eigenvalue; positive on the admissible cone.
pub fn df_scalar<T: Real>(lam: T, p: &TauParams<T>) -> Result<T, FtauError> {
    p.check_one(1, lam)?;
    Ok(p.term_derivative(lam))
}

/// `DF_τ(A)`: the spectral function of `A` with eigenvalues `df_scalar(λᵢ)`.
pub fn df_mat<T: Real>(a: &SymMat2<T>, p: &TauParams<T>) -> Result<SymMat2<T>, FtauError> {
    let sp = a.eigs();
    p.check_admissible(sp.eigenvalues())?;
    Ok(sp.map(|l| p.term_derivative(l)))
}

/// `P = ½(sin τ·A² + 2 cos τ·A + sin τ·I)`, positive definite on the admissible cone.
pub fn matrix_p<T: Real>(a: &SymMat2<T>, p: &TauParams<T>) -> Result<SymMat2<T>, FtauError> {
    p.check_admissible(a.eigs().eigenvalues())?;
    let poly = a.square().scale(p.sin) + a.scale(T::two() * p.cos) + SymMat2::scaled_identity(p.sin);
    let out = poly.scale(T::half());
    let lam1 = out.eigs().lam1;
    if !(lam1 > T::zero()) {
        return Err(FtauError::NotPositiveDefinite { lam1: lam1.as_f64() });
    }
    Ok(out)
}

/// `2·P·DF_τ(A) − I`; vanishes identically on the admissible cone.
pub fn p_identity_defect<T: Real>(a: &SymMat2<T>, p: &TauParams<T>) -> Result<Mat2<T>, FtauError> {
    let pm = matrix_p(a, p)?;
    let df = df_mat(a, p)?;
    Ok(pm.product(&df).scale(T::two()).sub(&Mat2::identity()))
}

pub fn attainable_range<T: Real>(p: &TauParams<T>) -> AdmissibleRange<T> {
    p.attainable_range()
}

/// Finds the admissible `x` with `term(x) = target` by bracketing and safeguarded
/// Newton iteration. `term` is strictly increasing, so a sign change certifies
/// the root.
pub(crate) fn invert_term<T: Real>(p: &TauParams<T>, target: T, fixed: T) -> Result<T, FtauError> {
    let no_root = || FtauError::NoRoot {
        target: target.as_f64(),
        fixed: fixed.as_f64(),
    };
    if !target.is_finite() {
        return Err(no_root());
    }
    let g = |x: T| p.term(x) - target;
    let bound = p.semiconvex_lower_bound();
    let limit = T::lit(BRACKET_LIMIT);

    let (mut lo, mut hi);
    if bound.is_finite() {
        lo = bound + T::lit(BRACKET_OFFSET) * T::one().max(bound.abs());
        if g(lo) > T::zero() {
            return Err(no_root());
        }
        let mut width = T::one();
        hi = lo + width;
        while g(hi) < T::zero() {
            width = width * T::two();
            if width > limit {
                return Err(no_root());
            }
            hi = lo + width;
        }
    } else {
        lo = -T::one();
        hi = T::one();
        while g(lo) > T::zero() {
            lo = lo * T::two();
            if -lo > limit {
                return Err(no_root());
            }
        }
        while g(hi) < T::zero() {
            hi = hi * T::two();
            if hi > limit {
                return Err(no_root());
            }
        }
    }

    let tol = T::tol(CALIBRATION_TOL);
    // a few extra Newton steps take the root from the tolerance to roundoff
    let polish = |mut x: T| {
        let mut gx = g(x);
        for _ in 0..3 {
            let next = x - gx / p.term_derivative(x);
            let gn = g(next);
            if !(gn.abs() < gx.abs()) || !p.is_admissible(next) {
                break;
            }
            x = next;
            gx = gn;
        }
        x
    };
    let mut x = T::half() * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let gx = g(x);
        if gx.abs() <= tol {
            return Ok(polish(x));
        }
        if gx < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - gx / p.term_derivative(x);
        x = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else {
            T::half() * (lo + hi)
        };
        if hi - lo <= T::epsilon() * x.abs().max(T::min_positive_value()) {
            break;
        }
    }
    let gx = g(x);
    if gx.abs() <= tol * T::lit(4.0) {
        Ok(x)
    } else {
        Err(no_root())
    }
}

/// Second eigenvalue `λ₂` with `F_τ(lam1, λ₂) = f_inf`.
pub fn calibrate_diagonal<T: Real>(p: &TauParams<T>, f_inf: T, lam1: T) -> Result<T, FtauError> {
    let range = p.attainable_range();
    if !range.contains_interior(f_inf) {
        return Err(FtauError::ValueOutOfRange {
            value: f_inf.as_f64(),
            lo: range.lo.as_f64(),
            hi: range.hi.as_f64(),
        });
    }
    if !p.is_admissible(lam1) {
        return Err(FtauError::InadmissibleInput(format!(
            "lambda1 = {lam1} is not above the semi-convex bound {} for {}",
            p.semiconvex_lower_bound(),
            p.branch()
        )));
    }
    invert_term(p, f_inf - p.term(lam1), lam1)
}

/// Isotropic calibration: `λ` with `F_τ(λ, λ) = f_inf`.
pub fn calibrate_isotropic<T: Real>(p: &TauParams<T>, f_inf: T) -> Result<T, FtauError> {
    let range = p.attainable_range();
    if !range.contains_interior(f_inf) {
        return Err(FtauError::ValueOutOfRange {
            value: f_inf.as_f64(),
            lo: range.lo.as_f64(),
            hi: range.hi.as_f64(),
        });
    }
    invert_term(p, T::half() * f_inf, T::nan())
}

/// Moves the eigenvalues of `a` along the gradient of `F_τ` until
/// `F_τ(λ(A)) = f_inf`, keeping the eigenbasis. The first-order projection of
/// `a` onto the level set.
pub fn project_to_level_set<T: Real>(a: &SymMat2<T>, p: &TauParams<T>, f_inf: T) -> Result<SymMat2<T>, FtauError> {
    let sp = a.eigs();
    p.check_admissible(sp.eigenvalues())?;
    let range = p.attainable_range();
    if !range.contains_interior(f_inf) {
        return Err(FtauError::ValueOutOfRange {
            value: f_inf.as_f64(),
            lo: range.lo.as_f64(),
            hi: range.hi.as_f64(),
        });
    }
    let w1 = p.term_derivative(sp.lam1);
    let w2 = p.term_derivative(sp.lam2);
    let norm = w1.hypot(w2);
    let (w1, w2) = (w1 / norm, w2 / norm);
    let value = |t: T| p.term(sp.lam1 + t * w1) + p.term(sp.lam2 + t * w2) - f_inf;
    let admissible = |t: T| p.is_admissible(sp.lam1 + t * w1) && p.is_admissible(sp.lam2 + t * w2);

    let tol = T::tol(CALIBRATION_TOL);
    if value(T::zero()).abs() <= tol {
        return Ok(*a);
    }
    // bracket in t; the map t ↦ value(t) is increasing
    let mut step = T::one();
    let (mut lo, mut hi) = (T::zero(), T::zero());
    if value(T::zero()) < T::zero() {
        loop {
            hi = step;
            if value(hi) >= T::zero() {
                break;
            }
            lo = hi;
            step = step * T::two();
            if step > T::lit(BRACKET_LIMIT) {
                return Err(FtauError::NoRoot {
                    target: f_inf.as_f64(),
                    fixed: T::nan().as_f64(),
                });
            }
        }
    } else {
        loop {
            let mut t = -step;
            while !admissible(t) {
                t = T::half() * (t + lo);
            }
            lo = t;
            if value(lo) <= T::zero() {
                break;
            }
            hi = lo;
            step = step * T::two();
            if step > T::lit(BRACKET_LIMIT) {
                return Err(FtauError::NoRoot {
                    target: f_inf.as_f64(),
                    fixed: T::nan().as_f64(),
                });
            }
        }
    }
    let mut t = T::half() * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let v = value(t);
        if v.abs() <= tol {
            break;
        }
        if v < T::zero() {
            lo = t;
        } else {
            hi = t;
        }
        let slope = w1 * p.term_derivative(sp.lam1 + t * w1) + w2 * p.term_derivative(sp.lam2 + t * w2);
        let newton = t - v / slope;
        t = if newton > lo && newton < hi {
            newton
        } else {
            T::half() * (lo + hi)
        };
    }
    Ok(sp.compose(sp.lam1 + t * w1, sp.lam2 + t * w2))
}

/// `cos f·tr M + sin f·det M − sin f`: the polynomial form of the special
/// Lagrangian equation at phase `f`.
pub fn algebraic_residual_spl<T: Real>(m: &SymMat2<T>, fval: T) -> T {
    let (s, c) = fval.sin_cos();
    c * m.trace() + s * m.det() - s
}

/// Second-order jet of a scalar function at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointJet<T> {
    pub x: Vec2<T>,
    pub value: T,
    pub grad: Vec2<T>,
    pub hess: SymMat2<T>,
}

/// Jet of `v = (u + a|x|²/2)/b` together with the phase of the special
/// Lagrangian equation it satisfies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedJet<T> {
    pub jet: PointJet<T>,
    pub phase: T,
}

/// Maps a `π/4 < τ < π/2` jet to the special Lagrangian form:
/// `Σ arctan λᵢ(D²v) = b/√(a²+1)·F_τ(λ(D²u)) + π/2`.
pub fn reduce_superquarter<T: Real>(u: &PointJet<T>, p: &TauParams<T>) -> Result<ReducedJet<T>, FtauError> {
    if p.branch() != Branch::SuperQuarter {
        return Err(FtauError::WrongBranch {
            expected: Branch::SuperQuarter,
            actual: p.branch(),
        });
    }
    let fu = f_tau_mat(&u.hess, p)?;
    let (a, b) = (p.a(), p.b_coef());
    let r2 = u.x[0] * u.x[0] + u.x[1] * u.x[1];
    let jet = PointJet {
        x: u.x,
        value: (u.value + T::half() * a * r2) / b,
        grad: [(u.grad[0] + a * u.x[0]) / b, (u.grad[1] + a * u.x[1]) / b],
        hess: (u.hess + SymMat2::scaled_identity(a)).scale(b.recip()),
    };
    Ok(ReducedJet {
        jet,
        phase: superquarter_phase(p, fu),
    })
}

/// Phase map `g ↦ b/√(a²+1)·g + π/2`.
pub fn superquarter_phase<T: Real>(p: &TauParams<T>, g: T) -> T {
    p.b_coef() * p.sin_tau() * g + T::FRAC_PI_2()
}
