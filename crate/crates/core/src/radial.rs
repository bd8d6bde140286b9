//! Radially symmetric solutions of `F_τ(λ(D²u)) = f(r)`.
//!
//! For radial `u` the Hessian eigenvalues are `u″` and `u′/r`. The integrator
//! works with the deviation `w = u − λr²/2` from the quadratic whose
//! eigenvalue `λ` solves `F_τ(λ, λ) = f(∞)`, so decaying remainders are never
//! swamped by the `r²` growth of `u`.

use std::fmt::Debug;

use thiserror::Error;

use crate::asymptotics::{decay_fit, DecayFit};
use crate::ftau::{calibrate_isotropic, invert_term, Branch, FtauError, TauParams};
use crate::lstsq::{lstsq, Design};
use crate::quadrature::{cumulative, integrate, integrate_to_infinity, QuadratureError};
use crate::scalar::Real;

const NEWTON_ITERATIONS: usize = 200;
const EXPANSION_LIMIT: f64 = 1e12;
const ORACLE_TOL: f64 = 1e-13;
const COUNTEREXAMPLE_SAMPLES: usize = 4000;
const COUNTEREXAMPLE_FIT_START: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadialError {
    #[error("NO_ROOT: the trajectory left the admissible cone at r = {r}")]
    NoRoot { r: f64 },
    #[error("STEP_TOO_LARGE: a Runge-Kutta stage at r = {r} has u'/r = {mu} at or below the bound {bound}")]
    StepTooLarge { r: f64, mu: f64, bound: f64 },
    #[error("NEGATIVE_RADICAND: u'(r)^2 = {value} is not positive at r = {r}")]
    NegativeRadicand { r: f64, value: f64 },
    #[error("INVALID_INPUT: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Ftau(#[from] FtauError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// An integration that stopped early, with the nodes accepted so far.
#[derive(Clone, Error)]
#[error("{error}")]
pub struct RadialFailure<T> {
    pub error: RadialError,
    pub partial: RadialProfile<T>,
}

impl<T> Debug for RadialFailure<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RadialFailure")
            .field("error", &self.error)
            .field("partial_nodes", &self.partial.r.len())
            .finish()
    }
}

/// Right-hand side `f(r) = f(∞) + δf(r)`.
pub trait RadialRhs<T: Real>: Sync {
    fn f_inf(&self) -> T;

    /// `f(r) − f(∞)`, evaluated without cancellation.
    fn delta(&self, r: T) -> T;

    fn value(&self, r: T) -> T {
        self.f_inf() + self.delta(r)
    }
}

/// `f(r) = f_inf + amp·r^{−ζ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbedRhs<T> {
    pub f_inf: T,
    pub amp: T,
    pub zeta: T,
}

impl<T: Real> PerturbedRhs<T> {
    pub fn new(f_inf: T, amp: T, zeta: T) -> Result<Self, RadialError> {
        if !(zeta > T::zero()) || !f_inf.is_finite() || !amp.is_finite() {
            return Err(RadialError::InvalidInput(format!(
                "need finite f_inf, amp and zeta > 0, got ({f_inf}, {amp}, {zeta})"
            )));
        }
        Ok(Self { f_inf, amp, zeta })
    }

    /// `f` is monotone in `r`, so it stays in the open attainable range on
    /// `[r0, ∞)` iff both `f(r0)` and `f(∞)` do.
    pub fn check_range(&self, p: &TauParams<T>, r0: T) -> Result<(), RadialError> {
        let range = p.attainable_range();
        for v in [self.f_inf, self.value(r0)] {
            if !range.contains_interior(v) {
                return Err(RadialError::Ftau(FtauError::ValueOutOfRange {
                    value: v.as_f64(),
                    lo: range.lo.as_f64(),
                    hi: range.hi.as_f64(),
                }));
            }
        }
        Ok(())
    }
}

impl<T: Real> RadialRhs<T> for PerturbedRhs<T> {
    fn f_inf(&self) -> T {
        self.f_inf
    }

    fn delta(&self, r: T) -> T {
        self.amp * r.powf(-self.zeta)
    }
}

/// Right-hand side given by a closure for `δf`.
pub struct RhsFn<T, F> {
    pub f_inf: T,
    pub delta: F,
}

impl<T: Real, F: Fn(T) -> T + Sync> RadialRhs<T> for RhsFn<T, F> {
    fn f_inf(&self) -> T {
        self.f_inf
    }

    fn delta(&self, r: T) -> T {
        (self.delta)(r)
    }
}

/// Radial density `ψ` of the Monge–Ampère problem `det D²u = ψ`.
pub trait RadialDensity<T: Real>: Sync {
    fn psi_inf(&self) -> T;

    /// `ψ(r) − ψ(∞)`.
    fn excess(&self, r: T) -> T;

    fn psi(&self, r: T) -> T {
        self.psi_inf() + self.excess(r)
    }
}

pub struct DensityFn<T, F> {
    pub psi_inf: T,
    pub excess: F,
}

impl<T: Real, F: Fn(T) -> T + Sync> RadialDensity<T> for DensityFn<T, F> {
    fn psi_inf(&self) -> T {
        self.psi_inf
    }

    fn excess(&self, r: T) -> T {
        (self.excess)(r)
    }
}

/// The `τ = 0` right-hand side `f = ½ ln ψ` of a density.
pub struct MaDensityRhs<'a, D>(pub &'a D);

impl<T: Real, D: RadialDensity<T>> RadialRhs<T> for MaDensityRhs<'_, D> {
    fn f_inf(&self) -> T {
        T::half() * self.0.psi_inf().ln()
    }

    fn delta(&self, r: T) -> T {
        T::half() * (self.0.excess(r) / self.0.psi_inf()).ln_1p()
    }
}

/// Sampled radial solution. `w`, `dw`, `ddw` hold `u − λr²/2` and its
/// derivatives to full precision.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile<T> {
    pub branch: Branch,
    pub lambda: T,
    pub r: Vec<T>,
    pub u: Vec<T>,
    pub du: Vec<T>,
    pub ddu: Vec<T>,
    pub w: Vec<T>,
    pub dw: Vec<T>,
    pub ddw: Vec<T>,
}

impl<T: Real> RadialProfile<T> {
    fn empty(branch: Branch, lambda: T) -> Self {
        Self {
            branch,
            lambda,
            r: Vec::new(),
            u: Vec::new(),
            du: Vec::new(),
            ddu: Vec::new(),
            w: Vec::new(),
            dw: Vec::new(),
            ddw: Vec::new(),
        }
    }

    fn push(&mut self, r: T, w: T, dw: T, ddw: T) {
        let l = self.lambda;
        self.r.push(r);
        self.w.push(w);
        self.dw.push(dw);
        self.ddw.push(ddw);
        self.u.push(T::half() * l * r * r + w);
        self.du.push(l * r + dw);
        self.ddu.push(l + ddw);
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Indices with `r_lo ≤ r ≤ r_hi`.
    pub fn window(&self, r_lo: T, r_hi: T) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.r[i] >= r_lo && self.r[i] <= r_hi)
            .collect()
    }

    /// Every node has `(u″, u′/r)` strictly above the semi-convex bound.
    pub fn is_admissible(&self, p: &TauParams<T>) -> bool {
        (0..self.len()).all(|i| p.is_admissible(self.ddu[i]) && p.is_admissible(self.du[i] / self.r[i]))
    }
}

/// Initial data at `r0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialInit<T> {
    pub r0: T,
    pub u0: T,
    pub du0: T,
}

impl<T: Real> RadialInit<T> {
    /// On the quadratic `λr²/2`, with `u′(r0)` raised by `slope_shift`.
    pub fn on_quadratic(lambda: T, r0: T, slope_shift: T) -> Self {
        Self {
            r0,
            u0: T::half() * lambda * r0 * r0,
            du0: lambda * r0 + slope_shift,
        }
    }
}

/// Solves `term(λ + x) − term(λ) = t` for `x`. Returns `None` when no
/// admissible root exists.
fn solve_increment<T: Real>(p: &TauParams<T>, lam: T, t: T) -> Option<T> {
    if t == T::zero() {
        return Some(T::zero());
    }
    if !t.is_finite() {
        return None;
    }
    let floor = p.semiconvex_lower_bound() - lam;
    let (mut lo, mut hi) = (floor, T::infinity());
    let mut x = t / p.term_derivative(lam);
    if !(x > lo) || !x.is_finite() {
        x = if lo.is_finite() { T::half() * lo } else { -T::one() };
    }
    let limit = T::lit(EXPANSION_LIMIT);
    let eps4 = T::epsilon() * T::lit(4.0);
    for _ in 0..NEWTON_ITERATIONS {
        let g = p.term_increment(lam, x) - t;
        if g == T::zero() {
            return Some(x);
        }
        if g < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let slope = p.term_derivative(lam + x);
        let newton = x - g / slope;
        let next = if newton > lo && newton < hi && newton.is_finite() {
            newton
        } else if lo.is_finite() && hi.is_finite() {
            T::half() * (lo + hi)
        } else if hi.is_infinite() {
            x + T::two() * x.abs().max(T::one())
        } else {
            x - T::two() * x.abs().max(T::one())
        };
        if next.abs() > limit {
            return None;
        }
        if (next - x).abs() <= eps4 * x.abs() {
            return Some(next);
        }
        x = next;
    }
    None
}

/// The unique `u″` with `F_τ(u″, μ) = f_val`.
pub fn solve_ddu<T: Real>(p: &TauParams<T>, f_val: T, mu: T) -> Result<T, RadialError> {
    if !p.is_admissible(mu) {
        return Err(RadialError::Ftau(FtauError::InadmissibleInput(format!(
            "u'/r = {mu} is not above the semi-convex bound {}",
            p.semiconvex_lower_bound()
        ))));
    }
    Ok(invert_term(p, f_val - p.term(mu), mu)?)
}

struct Deviation<'a, T, R> {
    p: &'a TauParams<T>,
    rhs: &'a R,
    lambda: T,
    /// `f(∞) − F_τ(λ, λ)`; zero when `λ` is calibrated.
    offset: T,
}

impl<T: Real, R: RadialRhs<T>> Deviation<'_, T, R> {
    /// `w″` at radius `r` given `w′`.
    fn ddw(&self, r: T, dw: T) -> Result<T, RadialError> {
        let dmu = dw / r;
        let mu = self.lambda + dmu;
        if !self.p.is_admissible(mu) {
            return Err(RadialError::StepTooLarge {
                r: r.as_f64(),
                mu: mu.as_f64(),
                bound: self.p.semiconvex_lower_bound().as_f64(),
            });
        }
        let t = self.offset + self.rhs.delta(r) - self.p.term_increment(self.lambda, dmu);
        solve_increment(self.p, self.lambda, t).ok_or(RadialError::NoRoot { r: r.as_f64() })
    }

    /// `d(w, w′)/ds`.
    fn field(&self, s: T, state: [T; 2]) -> Result<[T; 2], RadialError> {
        let r = s.exp();
        let x = self.ddw(r, state[1])?;
        Ok([r * state[1], r * x])
    }
}

/// Classical RK4 in `s = ln r` with `n_steps` uniform steps.
#[allow(clippy::result_large_err)]
pub fn integrate_radial<T: Real, R: RadialRhs<T>>(
    p: &TauParams<T>,
    rhs: &R,
    init: RadialInit<T>,
    r_max: T,
    n_steps: usize,
) -> Result<RadialProfile<T>, RadialFailure<T>> {
    let fail_early = |error: RadialError| RadialFailure {
        error,
        partial: RadialProfile::empty(p.branch(), T::nan()),
    };
    if !(init.r0 > T::zero()) || !(r_max > init.r0) || n_steps == 0 {
        return Err(fail_early(RadialError::InvalidInput(format!(
            "need 0 < r0 < r_max and n_steps > 0, got r0 = {}, r_max = {r_max}, n_steps = {n_steps}",
            init.r0
        ))));
    }
    let f_inf = rhs.f_inf();
    let lambda = match calibrate_isotropic(p, f_inf) {
        Ok(l) => l,
        Err(_) => {
            let mu = init.du0 / init.r0;
            if p.is_admissible(mu) {
                mu
            } else {
                return Err(fail_early(RadialError::InvalidInput(format!(
                    "f_inf = {f_inf} has no isotropic calibration and u'(r0)/r0 = {mu} is inadmissible"
                ))));
            }
        }
    };
    let dev = Deviation {
        p,
        rhs,
        lambda,
        offset: f_inf - T::two() * p.term(lambda),
    };
    let mut profile = RadialProfile::empty(p.branch(), lambda);
    let fail = |error: RadialError, partial: RadialProfile<T>| RadialFailure { error, partial };

    let s0 = init.r0.ln();
    let h = (r_max.ln() - s0) / T::from_count(n_steps);
    let mut y = [
        init.u0 - T::half() * lambda * init.r0 * init.r0,
        init.du0 - lambda * init.r0,
    ];
    let mut r = init.r0;
    match dev.ddw(r, y[1]) {
        Ok(x) => profile.push(r, y[0], y[1], x),
        Err(e) => return Err(fail(e, profile)),
    }
    let half = T::half();
    let sixth = T::lit(6.0).recip();
    for n in 0..n_steps {
        let s = s0 + h * T::from_count(n);
        let stage = |s: T, y: [T; 2]| dev.field(s, y);
        let step = (|| {
            let k1 = stage(s, y)?;
            let k2 = stage(s + half * h, [y[0] + half * h * k1[0], y[1] + half * h * k1[1]])?;
            let k3 = stage(s + half * h, [y[0] + half * h * k2[0], y[1] + half * h * k2[1]])?;
            let k4 = stage(s + h, [y[0] + h * k3[0], y[1] + h * k3[1]])?;
            Ok::<_, RadialError>([
                y[0] + h * sixth * (k1[0] + T::two() * (k2[0] + k3[0]) + k4[0]),
                y[1] + h * sixth * (k1[1] + T::two() * (k2[1] + k3[1]) + k4[1]),
            ])
        })();
        y = match step {
            Ok(next) => next,
            Err(e) => return Err(fail(e, profile)),
        };
        r = if n + 1 == n_steps { r_max } else { (s + h).exp() };
        match dev.ddw(r, y[1]) {
            Ok(x) => profile.push(r, y[0], y[1], x),
            Err(e) => return Err(fail(e, profile)),
        }
    }
    Ok(profile)
}

/// Largest `|F_τ(u″, u′/r) − f(r)|` over the profile, evaluated directly.
pub fn profile_residual<T: Real, R: RadialRhs<T>>(
    p: &TauParams<T>,
    rhs: &R,
    profile: &RadialProfile<T>,
) -> Result<T, FtauError> {
    let mut worst = T::zero();
    for i in 0..profile.len() {
        let r = profile.r[i];
        let f = crate::ftau::f_tau([profile.ddu[i], profile.du[i] / r], p)?;
        worst = worst.max((f - rhs.value(r)).abs());
    }
    Ok(worst)
}

/// `u′` of the `τ = 0` radial solution by quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct MaOracle<T> {
    /// `√ψ(∞)`.
    pub lambda: T,
    pub du: Vec<T>,
    /// `u′ − λr`, free of cancellation.
    pub du_excess: Vec<T>,
}

/// `u′(r) = √(du0² + 2∫_{r0}^r sψ(s) ds)` at the sample radii.
pub fn ma_radial_oracle<T: Real, D: RadialDensity<T>>(
    psi: &D,
    r0: T,
    du0: T,
    r: &[T],
) -> Result<MaOracle<T>, RadialError> {
    let psi_inf = psi.psi_inf();
    if !(psi_inf > T::zero()) {
        return Err(RadialError::InvalidInput(format!(
            "psi(inf) = {psi_inf} must be positive"
        )));
    }
    let lambda = psi_inf.sqrt();
    let tol = T::tol(ORACLE_TOL);
    let mut acc = T::zero();
    let mut prev = r0;
    let mut du = Vec::with_capacity(r.len());
    let mut du_excess = Vec::with_capacity(r.len());
    for &ri in r {
        if ri < prev {
            return Err(RadialError::InvalidInput(format!(
                "sample radii must be increasing and start at or after r0 = {r0}"
            )));
        }
        acc = acc + integrate(|s| s * psi.excess(s), prev, ri, tol * T::lit(1e-3), tol)?;
        prev = ri;
        // u′² − λ²r² = du0² − λ²r0² + 2∫ s(ψ − λ²)
        let gap = du0 * du0 - psi_inf * r0 * r0 + T::two() * acc;
        let radicand = psi_inf * ri * ri + gap;
        if !(radicand > T::zero()) {
            return Err(RadialError::NegativeRadicand {
                r: ri.as_f64(),
                value: radicand.as_f64(),
            });
        }
        let d = radicand.sqrt();
        du.push(d);
        du_excess.push(gap / (d + lambda * ri));
    }
    Ok(MaOracle { lambda, du, du_excess })
}

/// Coefficient `d` of `d·ln(xᵀPx)` for the `τ = 0` radial solution:
/// `u′ = λr + K/(2λr) + o(1/r)` with `K = du0² − λ²r0² + 2∫_{r0}^∞ s(ψ − λ²)`,
/// and `2d/r` matches the second term.
pub fn ma_log_coefficient<T: Real, D: RadialDensity<T>>(psi: &D, r0: T, du0: T) -> Result<T, RadialError> {
    let psi_inf = psi.psi_inf();
    let lambda = psi_inf.sqrt();
    let tol = T::tol(ORACLE_TOL);
    let tail = integrate_to_infinity(|s| s * psi.excess(s), r0, tol * T::lit(1e-3), tol)?;
    let k = du0 * du0 - psi_inf * r0 * r0 + T::two() * tail;
    Ok(k / (T::lit(4.0) * lambda))
}

/// The `ζ = 2` radial solution with `ψ = 1 + c r⁻²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample<T> {
    pub r: Vec<T>,
    /// `u − r²/2` with `u(1) = ½`.
    pub w: Vec<T>,
    pub du: Vec<T>,
    /// Least-squares coefficient of `(ln r)²` in `w` over `[10, r_max]`.
    pub log_squared_coef: T,
    /// Decay/growth class of `w`; `None` when `w` vanishes identically.
    pub fit: Option<DecayFit<T>>,
}

impl<T: Real> Counterexample<T> {
    /// Fitted log power, zero when `w ≡ 0`.
    pub fn q(&self) -> T {
        self.fit.map(|f| f.q).unwrap_or_else(T::zero)
    }
}

pub fn counterexample_zeta2<T: Real>(c: T, r_max: T) -> Result<Counterexample<T>, RadialError> {
    if !(c > -T::half()) {
        return Err(RadialError::InvalidInput(format!("c = {c} must exceed -1/2")));
    }
    let fit_start = T::lit(COUNTEREXAMPLE_FIT_START);
    if !(r_max > fit_start * T::lit(10.0)) {
        return Err(RadialError::InvalidInput(format!("r_max = {r_max} must exceed 100")));
    }
    let n = COUNTEREXAMPLE_SAMPLES;
    let h = r_max.ln() / T::from_count(n - 1);
    let r: Vec<T> = (0..n)
        .map(|i| {
            if i + 1 == n {
                r_max
            } else {
                (h * T::from_count(i)).exp()
            }
        })
        .collect();
    let density = DensityFn {
        psi_inf: T::one(),
        excess: move |s: T| c / (s * s),
    };
    let oracle = ma_radial_oracle(&density, T::one(), T::one(), &r)?;
    // ∫_1^r (u′ − s) ds in s = ln r
    let integrand: Vec<T> = oracle.du_excess.iter().zip(&r).map(|(e, ri)| *e * *ri).collect();
    let w = cumulative(h, &integrand)?;

    let window: Vec<usize> = (0..n).filter(|&i| r[i] >= fit_start).collect();
    let mut design = Design::new(3);
    let mut y = Vec::with_capacity(window.len());
    for &i in &window {
        let l = r[i].ln();
        design.push_row(&[T::one(), l, l * l]);
        y.push(w[i]);
    }
    let (log_squared_coef, fit) = if c == T::zero() {
        (T::zero(), None)
    } else {
        let sol = lstsq(&design, &y).map_err(|e| RadialError::InvalidInput(e.to_string()))?;
        let rs: Vec<T> = window.iter().map(|&i| r[i]).collect();
        let ws: Vec<T> = window.iter().map(|&i| w[i]).collect();
        let fit = decay_fit(&rs, &ws).map_err(|e| RadialError::InvalidInput(e.to_string()))?;
        (sol.coef[2], Some(fit))
    };
    Ok(Counterexample {
        r,
        w,
        du: oracle.du,
        log_squared_coef,
        fit,
    })
}
