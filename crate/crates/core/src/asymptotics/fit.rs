use crate::ftau::{f_tau_mat, matrix_p, project_to_level_set, TauParams};
use crate::linalg::{SymMat2, Vec2};
use crate::lstsq::{lstsq, Design, LstsqSolution};
use crate::poisson::{log_power_fit, ScalarField};
use crate::radial::RadialProfile;
use crate::scalar::Real;

use super::expansion::Expansion;
use super::{AsymptoticCoefficients, AsymptoticsError, FitRecord};

const Q_SNAP: f64 = 0.15;
const MIN_WINDOW_RATIO: f64 = 5.0;
const LEVEL_SET_TOL: f64 = 1e-8;
const CONDITION_LIMIT: f64 = 1e8;
const JOINT_ITERATIONS: usize = 12;
const VARPRO_RANGE: (f64, f64) = (0.05, 4.0);
const VARPRO_GRID: usize = 80;
const RADIAL_RINGS: usize = 64;
const RADIAL_ANGLES: usize = 16;

/// `|v| ≈ C r^{−p} (ln r)^q`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit<T> {
    pub c: T,
    pub p: T,
    pub q: T,
    pub condition: T,
    /// `q` was rounded to an integer in `{0, 1, 2}` and `p` refitted.
    pub snapped: bool,
    pub sign_change: bool,
}

/// Log-power regression with `q` snapped to `{0, 1, 2}` when within 0.15.
pub fn decay_fit<T: Real>(r: &[T], v: &[T]) -> Result<DecayFit<T>, AsymptoticsError> {
    let free = log_power_fit(r, v, None)?;
    let target = free.q.round() + T::zero();
    let snap = target >= T::zero() && target <= T::two() && (free.q - target).abs() <= T::lit(Q_SNAP);
    let fit = if snap { log_power_fit(r, v, Some(target))? } else { free };
    Ok(DecayFit {
        c: fit.ln_c.exp(),
        p: fit.p,
        q: fit.q,
        condition: fit.condition,
        snapped: snap,
        sign_change: free.sign_change,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateOrder {
    /// Remainder after the quadratic and logarithmic parts.
    Behavior,
    /// Remainder after the `d₁, d₂` order as well.
    Next,
}

/// Decay `(p, q)` of the remainder predicted for a right-hand side that
/// approaches its limit like `r^{−ζ}`.
pub fn theorem_rate<T: Real>(zeta: T, order: RateOrder) -> Result<(T, T), AsymptoticsError> {
    let eps = T::lit(1e-9);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    match order {
        RateOrder::Behavior => {
            if !(zeta > T::two()) {
                return Err(AsymptoticsError::OutOfRange {
                    zeta: zeta.as_f64(),
                    min: 2.0,
                    order: "behavior",
                });
            }
            if (zeta - three).abs() < eps {
                Ok((T::one(), T::one()))
            } else {
                Ok((zeta.min(three) - T::two(), T::zero()))
            }
        }
        RateOrder::Next => {
            if !(zeta > three) {
                return Err(AsymptoticsError::OutOfRange {
                    zeta: zeta.as_f64(),
                    min: 3.0,
                    order: "next",
                });
            }
            if zeta > four - eps {
                Ok((T::two(), T::one()))
            } else {
                Ok((zeta - T::two(), T::zero()))
            }
        }
    }
}

/// Result of fitting sampled data to the expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitReport<T> {
    pub coeffs: AsymptoticCoefficients<T>,
    /// The `P` the logarithmic and dipole terms were fitted against.
    pub p: SymMat2<T>,
    /// Decay of what is left after subtracting the fitted expansion.
    pub residual: Option<DecayFit<T>>,
    pub condition: T,
    pub r_lo: T,
    pub r_hi: T,
    /// The fitted `A` was moved onto the level set `F_τ(λ(A)) = f(∞)`.
    pub projected: bool,
}

impl<T: Real> FitReport<T> {
    /// Residual exponent, withheld when the design is too ill-conditioned.
    pub fn residual_p(&self) -> Option<T> {
        if self.condition < T::lit(CONDITION_LIMIT) {
            self.residual.map(|r| r.p)
        } else {
            None
        }
    }

    pub fn residual_q(&self) -> Option<T> {
        self.residual_p().and(self.residual.map(|r| r.q))
    }

    pub fn to_record(&self) -> FitRecord {
        let cf = &self.coeffs;
        FitRecord {
            a11: cf.a.m11.as_f64(),
            a12: cf.a.m12.as_f64(),
            a22: cf.a.m22.as_f64(),
            b1: cf.b[0].as_f64(),
            b2: cf.b[1].as_f64(),
            c: cf.c.as_f64(),
            d: cf.d.as_f64(),
            d1: cf.d1.as_f64(),
            d2: cf.d2.as_f64(),
            residual_p: self.residual_p().map(|v| v.as_f64()),
            residual_q: self.residual_q().map(|v| v.as_f64()),
            condition: self.condition.as_f64(),
            r_lo: self.r_lo.as_f64(),
            r_hi: self.r_hi.as_f64(),
        }
    }
}

struct Sample<T> {
    x: Vec2<T>,
    u: T,
}

fn check_window<T: Real>(lo: T, hi: T, r_lo: T, r_hi: T) -> Result<(), AsymptoticsError> {
    let slack = T::lit(1e-9);
    let inside = r_lo >= lo * (T::one() - slack) && r_hi <= hi * (T::one() + slack);
    if !inside || !(r_hi >= r_lo * T::lit(MIN_WINDOW_RATIO)) {
        return Err(AsymptoticsError::WindowTooNarrow {
            r_lo: r_lo.as_f64(),
            r_hi: r_hi.as_f64(),
            min_ratio: MIN_WINDOW_RATIO,
        });
    }
    Ok(())
}

fn in_window<T: Real>(r: T, r_lo: T, r_hi: T) -> bool {
    let slack = T::lit(1e-12);
    r >= r_lo * (T::one() - slack) && r <= r_hi * (T::one() + slack)
}

fn quadratic_row<T: Real>(x: Vec2<T>) -> [T; 6] {
    [x[0] * x[0], x[0] * x[1], x[1] * x[1], x[0], x[1], T::one()]
}

fn a_from<T: Real>(coef: &[T]) -> SymMat2<T> {
    SymMat2::new(T::two() * coef[0], coef[1], T::two() * coef[2])
}

/// Projects `a` onto the level set when it is off by more than the tolerance.
fn settle<T: Real>(a: SymMat2<T>, tau: &TauParams<T>, f_inf: T) -> Result<(SymMat2<T>, bool), AsymptoticsError> {
    let gap = (f_tau_mat(&a, tau)? - f_inf).abs();
    if gap > T::tol(LEVEL_SET_TOL) {
        Ok((project_to_level_set(&a, tau, f_inf)?, true))
    } else {
        Ok((a, false))
    }
}

/// Fits the expansion to `u` on the window `[r_lo, r_hi]` with the canonical
/// `P = matrix_p(A)`.
pub fn fit_expansion<T: Real>(
    u: &ScalarField<T>,
    tau: &TauParams<T>,
    f_inf: T,
    window: (T, T),
) -> Result<FitReport<T>, AsymptoticsError> {
    fit_expansion_scaled(u, tau, f_inf, window, T::one())
}

/// [`fit_expansion`] against `p_scale · matrix_p(A)`.
pub fn fit_expansion_scaled<T: Real>(
    u: &ScalarField<T>,
    tau: &TauParams<T>,
    f_inf: T,
    window: (T, T),
    p_scale: T,
) -> Result<FitReport<T>, AsymptoticsError> {
    let grid = *u.grid();
    let (r_lo, r_hi) = window;
    check_window(grid.r_min(), grid.r_max(), r_lo, r_hi)?;
    if !(p_scale > T::zero()) {
        return Err(AsymptoticsError::InvalidInput(format!(
            "P scale {p_scale} must be positive"
        )));
    }
    let rings: Vec<usize> = (0..grid.n_r())
        .filter(|&j| in_window(grid.radius(j), r_lo, r_hi))
        .collect();
    let samples: Vec<(usize, Sample<T>)> = rings
        .iter()
        .flat_map(|&j| (0..grid.n_theta()).map(move |i| (j, i)))
        .map(|(j, i)| {
            (
                j,
                Sample {
                    x: grid.point(j, i),
                    u: u.get(j, i),
                },
            )
        })
        .collect();

    // outermost decade: quadratic, linear and constant parts
    let outer_lo = r_lo.max(r_hi / T::lit(10.0));
    let mut design = Design::new(6);
    let mut y = Vec::new();
    for (j, s) in &samples {
        if grid.radius(*j) >= outer_lo * (T::one() - T::lit(1e-12)) {
            design.push_row(&quadratic_row(s.x));
            y.push(s.u);
        }
    }
    let sol = lstsq(&design, &y)?;
    let (mut a, _) = settle(a_from(&sol.coef), tau, f_inf)?;

    // joint refinement with the logarithmic and dipole columns
    for _ in 0..JOINT_ITERATIONS {
        let ex = Expansion::new(AsymptoticCoefficients::quadratic(a), matrix_p(&a, tau)?.scale(p_scale))?;
        let mut design = Design::new(9);
        let mut y = Vec::with_capacity(samples.len());
        for (_, s) in &samples {
            let q = quadratic_row(s.x);
            let [l, h1, h2] = ex.basis(s.x);
            design.push_row(&[q[0], q[1], q[2], q[3], q[4], q[5], l, h1, h2]);
            y.push(s.u);
        }
        let sol = lstsq(&design, &y)?;
        let next = a_from(&sol.coef);
        if tau.check_admissible(next.eigs().eigenvalues()).is_err() {
            break;
        }
        let change = (next - a).max_abs();
        a = next;
        if change <= T::epsilon() * T::lit(16.0) * a.max_abs() {
            break;
        }
    }
    let (a, projected) = settle(a, tau, f_inf)?;

    // A fixed: fit the remaining terms to u − ½xᵀAx
    let p = matrix_p(&a, tau)?.scale(p_scale);
    let ex = Expansion::new(AsymptoticCoefficients::quadratic(a), p)?;
    let mut design = Design::new(6);
    let mut y = Vec::with_capacity(samples.len());
    for (_, s) in &samples {
        let [l, h1, h2] = ex.basis(s.x);
        design.push_row(&[s.x[0], s.x[1], T::one(), l, h1, h2]);
        y.push(s.u - T::half() * a.quad_form(s.x));
    }
    let sol: LstsqSolution<T> = lstsq(&design, &y)?;
    let coeffs = AsymptoticCoefficients {
        a,
        b: [sol.coef[0], sol.coef[1]],
        c: sol.coef[2],
        d: sol.coef[3],
        d1: sol.coef[4],
        d2: sol.coef[5],
    };

    let full = Expansion::new(coeffs, p)?;
    let mut radii = Vec::with_capacity(rings.len());
    let mut norms = Vec::with_capacity(rings.len());
    for &j in &rings {
        let mut ss = T::zero();
        for i in 0..grid.n_theta() {
            let e = u.get(j, i) - full.value(grid.point(j, i));
            ss = ss + e * e;
        }
        radii.push(grid.radius(j));
        norms.push((ss * grid.dtheta()).sqrt());
    }
    let residual = decay_fit(&radii, &norms).ok();
    Ok(FitReport {
        coeffs,
        p,
        residual,
        condition: sol.condition,
        r_lo,
        r_hi,
        projected,
    })
}

fn radial_design<T: Real>(r: &[T], p: T) -> Design<T> {
    let mut design = Design::new(3);
    for ri in r {
        design.push_row(&[T::one(), ri.ln(), ri.powf(-p)]);
    }
    design
}

/// Fits a radial profile: `A = λI` is taken from the profile, `c + d·ln(xᵀPx)`
/// and the leading decaying power are found by variable projection over the
/// exponent.
pub fn fit_radial<T: Real>(
    profile: &RadialProfile<T>,
    tau: &TauParams<T>,
    window: (T, T),
) -> Result<FitReport<T>, AsymptoticsError> {
    let (r_lo, r_hi) = window;
    let (first, last) = match (profile.r.first(), profile.r.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(AsymptoticsError::InvalidInput("empty profile".into())),
    };
    check_window(first, last, r_lo, r_hi)?;
    let idx: Vec<usize> = (0..profile.len())
        .filter(|&i| in_window(profile.r[i], r_lo, r_hi))
        .collect();
    let r: Vec<T> = idx.iter().map(|&i| profile.r[i]).collect();
    let w: Vec<T> = idx.iter().map(|&i| profile.w[i]).collect();

    let objective = |p: T| -> T {
        lstsq(&radial_design(&r, p), &w)
            .map(|s| s.residual_norm())
            .unwrap_or_else(|_| T::infinity())
    };
    let (lo, hi) = (T::lit(VARPRO_RANGE.0), T::lit(VARPRO_RANGE.1));
    let step = (hi - lo) / T::from_count(VARPRO_GRID - 1);
    let mut best = (lo, objective(lo));
    for k in 1..VARPRO_GRID {
        let p = lo + step * T::from_count(k);
        let v = objective(p);
        if v < best.1 {
            best = (p, v);
        }
    }
    // golden section around the best grid point
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let g = (T::lit(5.0).sqrt() - T::one()) * T::half();
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = objective(d);
        }
    }
    let p_best = T::half() * (a + b);
    let sol = lstsq(&radial_design(&r, p_best), &w)?;
    let (c_fit, coef_ln) = (sol.coef[0], sol.coef[1]);

    let lambda = profile.lambda;
    let a_mat = SymMat2::scaled_identity(lambda);
    let p_mat = matrix_p(&a_mat, tau)?;
    let d_coef = T::half() * coef_ln;
    let c_coef = c_fit - d_coef * p_mat.m11.ln();

    let remainder: Vec<T> = r
        .iter()
        .zip(&w)
        .map(|(ri, wi)| *wi - c_fit - coef_ln * ri.ln())
        .collect();
    let residual = decay_fit(&r, &remainder).ok();

    // angular columns on rings of the rotated profile
    let ex = Expansion::new(AsymptoticCoefficients::quadratic(a_mat), p_mat)?;
    let mut design = Design::new(5);
    let mut y = Vec::new();
    let stride = (r.len() / RADIAL_RINGS).max(1);
    for (ri, wi) in r.iter().zip(&w).step_by(stride) {
        for k in 0..RADIAL_ANGLES {
            let theta = T::TAU() * T::from_count(k) / T::from_count(RADIAL_ANGLES);
            let (s, co) = theta.sin_cos();
            let x = [*ri * co, *ri * s];
            let [l, h1, h2] = ex.basis(x);
            design.push_row(&[T::one(), l, h1, h2, ri.powf(-p_best)]);
            y.push(*wi);
        }
    }
    let angular = lstsq(&design, &y)?;

    Ok(FitReport {
        coeffs: AsymptoticCoefficients {
            a: a_mat,
            b: [T::zero(); 2],
            c: c_coef,
            d: d_coef,
            d1: angular.coef[2],
            d2: angular.coef[3],
        },
        p: p_mat,
        residual,
        condition: sol.condition,
        r_lo,
        r_hi,
        projected: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::manufacture_rhs;
    use crate::poisson::AnnulusGrid;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn radii(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn decay_fit_examples() {
        let r = radii(40, 2.0, 2e3);
        let v: Vec<f64> = r.iter().map(|x| x.recip()).collect();
        let f = decay_fit(&r, &v).unwrap();
        assert!((f.p - 1.0).abs() < 0.05 && f.q == 0.0);
        let v: Vec<f64> = r.iter().map(|x| x.powi(-2) * x.ln()).collect();
        let f = decay_fit(&r, &v).unwrap();
        assert!((f.p - 2.0).abs() < 0.05 && f.q == 1.0);
        let v: Vec<f64> = r.iter().map(|x| -x.powf(-0.5)).collect();
        let f = decay_fit(&r, &v).unwrap();
        assert!(!f.sign_change);
        assert_relative_eq!(f.c, 1.0, max_relative = 1e-8);
    }

    #[test]
    fn theorem_rate_table() {
        assert_eq!(theorem_rate(2.5, RateOrder::Behavior).unwrap(), (0.5, 0.0));
        assert_eq!(theorem_rate(3.0, RateOrder::Behavior).unwrap(), (1.0, 1.0));
        assert_eq!(theorem_rate(3.0 + 1e-12, RateOrder::Behavior).unwrap(), (1.0, 1.0));
        assert_eq!(theorem_rate(3.5, RateOrder::Behavior).unwrap(), (1.0, 0.0));
        assert_eq!(theorem_rate(3.5, RateOrder::Next).unwrap(), (1.5, 0.0));
        assert_eq!(theorem_rate(5.0, RateOrder::Next).unwrap(), (2.0, 1.0));
        assert_eq!(theorem_rate(4.0 - 1e-12, RateOrder::Next).unwrap(), (2.0, 1.0));
        assert!(theorem_rate(2.0, RateOrder::Behavior).is_err());
        assert!(theorem_rate(3.0, RateOrder::Next).is_err());
    }

    #[test]
    fn exact_quadratic_roundtrip() {
        let grid = AnnulusGrid::new(10.0, 1e3, 48, 16).unwrap();
        let u = ScalarField::from_cartesian(grid, |x: [f64; 2]| 0.5 * (x[0] * x[0] + x[1] * x[1]));
        let rep = fit_expansion(&u, &TauParams::special_lagrangian(), FRAC_PI_2, (10.0, 1e3)).unwrap();
        assert!((rep.coeffs.a - SymMat2::identity()).max_abs() < 1e-8);
        for v in [
            rep.coeffs.b[0],
            rep.coeffs.b[1],
            rep.coeffs.c,
            rep.coeffs.d,
            rep.coeffs.d1,
            rep.coeffs.d2,
        ] {
            assert!(v.abs() < 1e-8, "{rep:?}");
        }
    }

    #[test]
    fn window_validation() {
        let grid = AnnulusGrid::new(10.0, 1e3, 48, 16).unwrap();
        let u = ScalarField::zeros(grid);
        let tau = TauParams::special_lagrangian();
        assert!(matches!(
            fit_expansion(&u, &tau, FRAC_PI_2, (100.0, 300.0)),
            Err(AsymptoticsError::WindowTooNarrow { .. })
        ));
        assert!(matches!(
            fit_expansion(&u, &tau, FRAC_PI_2, (5.0, 300.0)),
            Err(AsymptoticsError::WindowTooNarrow { .. })
        ));
    }

    #[test]
    fn manufactured_roundtrip() {
        let tau = TauParams::special_lagrangian();
        let truth = AsymptoticCoefficients {
            a: SymMat2::diag(1.0, 2.0),
            b: [0.0, 0.0],
            c: 1.0,
            d: 0.3,
            d1: 0.1,
            d2: -0.2,
        };
        let grid = AnnulusGrid::new(1e2, 1e4, 96, 32).unwrap();
        let m = manufacture_rhs(&truth, &tau, &grid).unwrap();
        let ex = Expansion::canonical(truth, &tau).unwrap();
        let u = ScalarField::from_cartesian(grid, |x| ex.value(x));
        let rep = fit_expansion(&u, &tau, m.f_inf, (1e2, 1e4)).unwrap();
        let err = rep.coeffs.max_relative_error(&truth, 1e-3);
        assert!(err < 1e-3, "{:?} err {err}", rep.coeffs);
    }
}
