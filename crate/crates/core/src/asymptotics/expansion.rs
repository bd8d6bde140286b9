use crate::ftau::{f_tau_mat, matrix_p, TauParams};
use crate::linalg::{sqrt_pd, SymMat2, Vec2};
use crate::poisson::{measure_field_decay, AnnulusGrid, MeasuredDecay, ScalarField};
use crate::scalar::Real;

use super::{AsymptoticCoefficients, AsymptoticsError};

/// An expansion with `P` and `S = P^{1/2}` fixed, for repeated evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Expansion<T> {
    pub cf: AsymptoticCoefficients<T>,
    p: SymMat2<T>,
    s: SymMat2<T>,
}

impl<T: Real> Expansion<T> {
    pub fn new(cf: AsymptoticCoefficients<T>, p: SymMat2<T>) -> Result<Self, AsymptoticsError> {
        let s = sqrt_pd(&p).ok_or(AsymptoticsError::SingularP {
            lam1: p.eigs().lam1.as_f64(),
        })?;
        Ok(Self { cf, p, s })
    }

    /// Uses the canonical `P = matrix_p(A)`.
    pub fn canonical(cf: AsymptoticCoefficients<T>, tau: &TauParams<T>) -> Result<Self, AsymptoticsError> {
        Self::new(cf, matrix_p(&cf.a, tau)?)
    }

    pub fn p(&self) -> &SymMat2<T> {
        &self.p
    }

    pub fn sqrt_p(&self) -> &SymMat2<T> {
        &self.s
    }

    pub fn y(&self, x: Vec2<T>) -> Vec2<T> {
        self.s.apply(x)
    }

    /// `(ln(xᵀPx), y₁/|y|², y₂/|y|²)`, the non-polynomial basis functions.
    pub fn basis(&self, x: Vec2<T>) -> [T; 3] {
        let y = self.y(x);
        let q = y[0] * y[0] + y[1] * y[1];
        [self.p.quad_form(x).ln(), y[0] / q, y[1] / q]
    }

    pub fn value(&self, x: Vec2<T>) -> T {
        let cf = &self.cf;
        let [ln_q, h1, h2] = self.basis(x);
        T::half() * cf.a.quad_form(x) + cf.b[0] * x[0] + cf.b[1] * x[1] + cf.c + cf.d * ln_q + cf.d1 * h1 + cf.d2 * h2
    }

    /// Value without the quadratic and linear parts.
    pub fn tail_value(&self, x: Vec2<T>) -> T {
        let [ln_q, h1, h2] = self.basis(x);
        self.cf.c + self.cf.d * ln_q + self.cf.d1 * h1 + self.cf.d2 * h2
    }

    pub fn gradient(&self, x: Vec2<T>) -> Vec2<T> {
        let cf = &self.cf;
        let px = self.p.apply(x);
        let q = x[0] * px[0] + x[1] * px[1];
        let y = self.y(x);
        let ny2 = y[0] * y[0] + y[1] * y[1];
        let dv = [cf.d1, cf.d2];
        let dy = dv[0] * y[0] + dv[1] * y[1];
        let two = T::two();
        let gy = [
            dv[0] / ny2 - two * dy * y[0] / (ny2 * ny2),
            dv[1] / ny2 - two * dy * y[1] / (ny2 * ny2),
        ];
        let gx = self.s.apply(gy);
        let ax = cf.a.apply(x);
        [
            ax[0] + cf.b[0] + two * cf.d * px[0] / q + gx[0],
            ax[1] + cf.b[1] + two * cf.d * px[1] / q + gx[1],
        ]
    }

    /// Hessian in `y` of `(d₁y₁ + d₂y₂)/|y|²`; traceless.
    pub fn y_hessian(&self, y: Vec2<T>) -> SymMat2<T> {
        let dv = [self.cf.d1, self.cf.d2];
        let n2 = y[0] * y[0] + y[1] * y[1];
        let n4 = n2 * n2;
        let dy = dv[0] * y[0] + dv[1] * y[1];
        let two = T::two();
        SymMat2::sym_outer(dv, y).scale(-two / n4) - SymMat2::scaled_identity(two * dy / n4)
            + SymMat2::outer(y).scale(T::lit(8.0) * dy / (n4 * n2))
    }

    /// `D²u − A`.
    pub fn hessian_perturbation(&self, x: Vec2<T>) -> SymMat2<T> {
        let px = self.p.apply(x);
        let q = x[0] * px[0] + x[1] * px[1];
        let log_part = (self.p.scale(T::two() / q) - SymMat2::outer(px).scale(T::lit(4.0) / (q * q))).scale(self.cf.d);
        log_part + self.y_hessian(self.y(x)).congruence(&self.s)
    }

    pub fn hessian(&self, x: Vec2<T>) -> SymMat2<T> {
        self.cf.a + self.hessian_perturbation(x)
    }
}

fn nonzero<T: Real>(x: Vec2<T>) -> Result<(), AsymptoticsError> {
    if x[0] == T::zero() && x[1] == T::zero() {
        return Err(AsymptoticsError::InvalidInput(
            "the expansion is singular at x = 0".into(),
        ));
    }
    Ok(())
}

pub fn expansion_value<T: Real>(
    cf: &AsymptoticCoefficients<T>,
    p: &SymMat2<T>,
    x: Vec2<T>,
) -> Result<T, AsymptoticsError> {
    nonzero(x)?;
    Ok(Expansion::new(*cf, *p)?.value(x))
}

pub fn expansion_gradient<T: Real>(
    cf: &AsymptoticCoefficients<T>,
    p: &SymMat2<T>,
    x: Vec2<T>,
) -> Result<Vec2<T>, AsymptoticsError> {
    nonzero(x)?;
    Ok(Expansion::new(*cf, *p)?.gradient(x))
}

pub fn expansion_hessian<T: Real>(
    cf: &AsymptoticCoefficients<T>,
    p: &SymMat2<T>,
    x: Vec2<T>,
) -> Result<SymMat2<T>, AsymptoticsError> {
    nonzero(x)?;
    Ok(Expansion::new(*cf, *p)?.hessian(x))
}

/// Sorted eigenvalues of `A` and the shifts `λᵢ(A + E) − λᵢ(A)`, computed
/// without forming the cancelling difference.
pub fn eigen_shift<T: Real>(a: &SymMat2<T>, e: &SymMat2<T>) -> ([T; 2], [T; 2]) {
    let sp = a.eigs();
    let mean = T::half() * (e.m11 + e.m22);
    let hd_a = T::half() * (a.m11 - a.m22);
    let hd_e = T::half() * (e.m11 - e.m22);
    let r_a = hd_a.hypot(a.m12);
    let r_h = (hd_a + hd_e).hypot(a.m12 + e.m12);
    let denom = r_a + r_h;
    let dr = if denom > T::zero() {
        (hd_e * (T::two() * hd_a + hd_e) + e.m12 * (T::two() * a.m12 + e.m12)) / denom
    } else {
        T::zero()
    };
    ([sp.lam1, sp.lam2], [mean - dr, mean + dr])
}

/// Right-hand side produced by an exact expansion.
#[derive(Clone, Debug)]
pub struct Manufactured<T> {
    pub f: ScalarField<T>,
    /// `f − f(∞)`, evaluated by increments.
    pub excess: ScalarField<T>,
    pub f_inf: T,
    pub p: SymMat2<T>,
    /// Decay of the circle norms of `excess`; `None` when it vanishes.
    pub decay: Option<MeasuredDecay<T>>,
}

/// `f = F_τ(λ(D²u))` for `u` the expansion with canonical `P`.
pub fn manufacture_rhs<T: Real>(
    cf: &AsymptoticCoefficients<T>,
    tau: &TauParams<T>,
    grid: &AnnulusGrid<T>,
) -> Result<Manufactured<T>, AsymptoticsError> {
    let f_inf = f_tau_mat(&cf.a, tau)?;
    let ex = Expansion::canonical(*cf, tau)?;
    let excess = ScalarField::try_from_cartesian(*grid, |x| {
        let (lam, shift) = eigen_shift(&cf.a, &ex.hessian_perturbation(x));
        tau.check_admissible([lam[0] + shift[0], lam[1] + shift[1]])?;
        Ok::<T, AsymptoticsError>(tau.term_increment(lam[0], shift[0]) + tau.term_increment(lam[1], shift[1]))
    })?;
    let f = excess.map(|v| f_inf + v);
    let decay = measure_field_decay(&excess).ok();
    Ok(Manufactured {
        f,
        excess,
        f_inf,
        p: *ex.p(),
        decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ftau::f_tau;
    use approx::assert_relative_eq;
    use std::f64::consts::{E, FRAC_PI_2};

    fn cf(a: SymMat2<f64>) -> AsymptoticCoefficients<f64> {
        AsymptoticCoefficients::quadratic(a)
    }

    #[test]
    fn value_examples() {
        let id = SymMat2::identity();
        assert_relative_eq!(expansion_value(&cf(id), &id, [3.0, 4.0]).unwrap(), 12.5);
        let log = AsymptoticCoefficients {
            d: 1.0,
            ..cf(SymMat2::zero())
        };
        assert_relative_eq!(expansion_value(&log, &id, [0.0, E]).unwrap(), 2.0, epsilon = 1e-15);
        let dip = AsymptoticCoefficients {
            d1: 1.0,
            ..cf(SymMat2::zero())
        };
        assert_relative_eq!(
            expansion_value(&dip, &id, [7.0, 0.0]).unwrap(),
            1.0 / 7.0,
            epsilon = 1e-16
        );
        assert!(expansion_value(&dip, &id, [0.0, 0.0]).is_err());
        assert!(matches!(
            expansion_value(&dip, &SymMat2::diag(1.0, -1.0), [1.0, 0.0]),
            Err(AsymptoticsError::SingularP { .. })
        ));
    }

    fn fd_hessian(ex: &Expansion<f64>, x: [f64; 2], h: f64) -> SymMat2<f64> {
        let f = |a: f64, b: f64| ex.value([x[0] + a, x[1] + b]);
        let c = f(0.0, 0.0);
        let m11 = (f(h, 0.0) - 2.0 * c + f(-h, 0.0)) / (h * h);
        let m22 = (f(0.0, h) - 2.0 * c + f(0.0, -h)) / (h * h);
        let m12 = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
        SymMat2::new(m11, m12, m22)
    }

    #[test]
    fn hessian_examples() {
        let a = SymMat2::new(1.3, 0.2, 0.7);
        let ex = Expansion::new(cf(a), SymMat2::identity()).unwrap();
        assert_eq!(ex.hessian([5.0, -2.0]), a);

        let log = AsymptoticCoefficients {
            d: 1.0,
            ..cf(SymMat2::zero())
        };
        let ex = Expansion::new(log, SymMat2::identity()).unwrap();
        let exact = ex.hessian([3.0, 4.0]);
        let fd = fd_hessian(&ex, [3.0, 4.0], 1e-3);
        assert!((exact - fd).max_abs() < 1e-8);
        // 2I/|x|² − 4x xᵀ/|x|⁴
        let expected = SymMat2::scaled_identity(2.0 / 25.0) - SymMat2::outer([3.0, 4.0]).scale(4.0 / 625.0);
        assert!((exact - expected).max_abs() < 1e-16);

        let dip = AsymptoticCoefficients {
            d1: 0.4,
            d2: -1.1,
            ..cf(SymMat2::zero())
        };
        let ex = Expansion::new(dip, SymMat2::identity()).unwrap();
        assert!(ex.hessian([2.0, -3.0]).trace().abs() < 1e-12);
    }

    #[test]
    fn hessian_and_gradient_with_general_p() {
        let full = AsymptoticCoefficients {
            a: SymMat2::diag(1.0, 2.0),
            b: [0.3, -0.1],
            c: 1.0,
            d: 0.3,
            d1: 0.1,
            d2: -0.2,
        };
        let ex = Expansion::new(full, SymMat2::new(1.5, 0.4, 0.8)).unwrap();
        let x = [6.0, -8.0];
        let fd = fd_hessian(&ex, x, 1e-2);
        assert!((ex.hessian(x) - fd).max_abs() < 1e-6);
        let h = 1e-5;
        let g = ex.gradient(x);
        let gx = (ex.value([x[0] + h, x[1]]) - ex.value([x[0] - h, x[1]])) / (2.0 * h);
        let gy = (ex.value([x[0], x[1] + h]) - ex.value([x[0], x[1] - h])) / (2.0 * h);
        assert_relative_eq!(g[0], gx, max_relative = 1e-7);
        assert_relative_eq!(g[1], gy, max_relative = 1e-7);
    }

    #[test]
    fn eigen_shift_is_exact_difference() {
        let a = SymMat2::new(1.0, 0.3, 2.0);
        let e = SymMat2::new(1e-3, -2e-4, 5e-4);
        let (lam, shift) = eigen_shift(&a, &e);
        let direct = (a + e).eigs();
        assert_relative_eq!(lam[0] + shift[0], direct.lam1, epsilon = 1e-15);
        assert_relative_eq!(lam[1] + shift[1], direct.lam2, epsilon = 1e-15);
        let (_, s) = eigen_shift(&SymMat2::identity(), &SymMat2::diag(1e-20, -1e-20));
        assert_relative_eq!(s[0], -1e-20);
        assert_relative_eq!(s[1], 1e-20);
    }

    #[test]
    fn manufacture_identity_and_log() {
        let tau = TauParams::special_lagrangian();
        let grid = AnnulusGrid::new(10.0, 1e3, 64, 16).unwrap();
        let m = manufacture_rhs(&cf(SymMat2::identity()), &tau, &grid).unwrap();
        assert!(m.f.values().iter().all(|v| (v - FRAC_PI_2).abs() < 1e-15));
        assert!(m.decay.is_none());

        let log = AsymptoticCoefficients {
            d: 0.3,
            ..cf(SymMat2::identity())
        };
        let m = manufacture_rhs(&log, &tau, &grid).unwrap();
        let k1 = m.decay.unwrap().k1;
        assert!((k1 - 4.0).abs() < 0.1, "k1 = {k1}");
        // increments agree with the direct evaluation where it is accurate
        let x = grid.point(0, 3);
        let ex = Expansion::canonical(log, &tau).unwrap();
        let direct = f_tau(ex.hessian(x).eigs().eigenvalues(), &tau).unwrap() - FRAC_PI_2;
        assert_relative_eq!(m.excess.get(0, 3), direct, max_relative = 1e-6);
    }

    #[test]
    fn manufacture_domain_violation() {
        let tau = TauParams::monge_ampere();
        let grid = AnnulusGrid::new(1.01, 10.0, 32, 16).unwrap();
        let bad = AsymptoticCoefficients {
            d: -5.0,
            ..cf(SymMat2::identity())
        };
        assert!(matches!(
            manufacture_rhs(&bad, &tau, &grid),
            Err(AsymptoticsError::Ftau(crate::ftau::FtauError::DomainViolation { .. }))
        ));
    }
}
