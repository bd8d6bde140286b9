//! 2×2 symmetric matrices, their closed-form spectra, and spectral functional calculus.

use std::ops::{Add, Mul, Neg, Sub};

use crate::scalar::Real;

/// Point or vector in the plane.
pub type Vec2<T> = [T; 2];

/// Symmetric 2×2 matrix stored by its three independent entries.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SymMat2<T> {
    pub m11: T,
    pub m12: T,
    pub m22: T,
}

/// General 2×2 matrix, row major. Only used where products of symmetric
/// matrices appear.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2<T>(pub [[T; 2]; 2]);

impl<T: Real> SymMat2<T> {
    pub fn new(m11: T, m12: T, m22: T) -> Self {
        Self { m11, m12, m22 }
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one())
    }

    pub fn zero() -> Self {
        Self::diag(T::zero(), T::zero())
    }

    pub fn diag(d1: T, d2: T) -> Self {
        Self::new(d1, T::zero(), d2)
    }

    pub fn scaled_identity(s: T) -> Self {
        Self::diag(s, s)
    }

    /// Outer product `v vᵀ`.
    pub fn outer(v: Vec2<T>) -> Self {
        Self::new(v[0] * v[0], v[0] * v[1], v[1] * v[1])
    }

    /// Symmetrized outer product `u vᵀ + v uᵀ`.
    pub fn sym_outer(u: Vec2<T>, v: Vec2<T>) -> Self {
        Self::new(
            T::two() * u[0] * v[0],
            u[0] * v[1] + u[1] * v[0],
            T::two() * u[1] * v[1],
        )
    }

    pub fn trace(&self) -> T {
        self.m11 + self.m22
    }

    pub fn det(&self) -> T {
        self.m11 * self.m22 - self.m12 * self.m12
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.m11 * s, self.m12 * s, self.m22 * s)
    }

    pub fn apply(&self, v: Vec2<T>) -> Vec2<T> {
        [self.m11 * v[0] + self.m12 * v[1], self.m12 * v[0] + self.m22 * v[1]]
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: Vec2<T>) -> T {
        let mv = self.apply(v);
        v[0] * mv[0] + v[1] * mv[1]
    }

    /// `M²`, which stays symmetric.
    pub fn square(&self) -> Self {
        Self::new(
            self.m11 * self.m11 + self.m12 * self.m12,
            self.m12 * (self.m11 + self.m22),
            self.m12 * self.m12 + self.m22 * self.m22,
        )
    }

    /// `S M S` for symmetric `S`; the congruence used to move Hessians between
    /// coordinate systems related by a symmetric linear map.
    pub fn congruence(&self, s: &SymMat2<T>) -> Self {
        let ms = self.product(s);
        let r = s.as_mat().mul(&ms);
        // symmetric in exact arithmetic; average the off-diagonal pair
        Self::new(r.0[0][0], T::half() * (r.0[0][1] + r.0[1][0]), r.0[1][1])
    }

    pub fn as_mat(&self) -> Mat2<T> {
        Mat2([[self.m11, self.m12], [self.m12, self.m22]])
    }

    /// Ordinary matrix product, generally not symmetric.
    pub fn product(&self, other: &SymMat2<T>) -> Mat2<T> {
        self.as_mat().mul(&other.as_mat())
    }

    /// Entry-wise maximum absolute value.
    pub fn max_abs(&self) -> T {
        self.m11.abs().max(self.m12.abs()).max(self.m22.abs())
    }

    /// Closed-form ordered eigendecomposition.
    pub fn eigs(&self) -> Spectrum<T> {
        Spectrum::of(self)
    }

    pub fn is_finite(&self) -> bool {
        self.m11.is_finite() && self.m12.is_finite() && self.m22.is_finite()
    }
}

impl<T: Real> Add for SymMat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.m11 + o.m11, self.m12 + o.m12, self.m22 + o.m22)
    }
}

impl<T: Real> Sub for SymMat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.m11 - o.m11, self.m12 - o.m12, self.m22 - o.m22)
    }
}

impl<T: Real> Neg for SymMat2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul<T> for SymMat2<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T: Real> Mat2<T> {
    pub fn identity() -> Self {
        Mat2([[T::one(), T::zero()], [T::zero(), T::one()]])
    }

    pub fn mul(&self, o: &Mat2<T>) -> Mat2<T> {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        let r0 = self.0[0][0].abs() + self.0[0][1].abs();
        let r1 = self.0[1][0].abs() + self.0[1][1].abs();
        r0.max(r1)
    }

    pub fn sub(&self, o: &Mat2<T>) -> Mat2<T> {
        let mut out = self.0;
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v - o.0[i][j];
            }
        }
        Mat2(out)
    }

    pub fn scale(&self, s: T) -> Mat2<T> {
        let mut out = self.0;
        for row in out.iter_mut() {
            for v in row.iter_mut() {
                *v = *v * s;
            }
        }
        Mat2(out)
    }
}

/// Ordered eigen-decomposition of a [`SymMat2`].
///
/// `theta_e ∈ [0, π)` is the direction angle of the eigenvector belonging to
/// the larger eigenvalue `lam2`; the eigenvector of `lam1` is that direction
/// rotated by +π/2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spectrum<T> {
    pub lam1: T,
    pub lam2: T,
    pub theta_e: T,
}

impl<T: Real> Spectrum<T> {
    pub fn of(m: &SymMat2<T>) -> Self {
        let mean = T::half() * (m.m11 + m.m22);
        let half_diff = T::half() * (m.m11 - m.m22);
        let radius = half_diff.hypot(m.m12);
        let mut theta = T::half() * (T::two() * m.m12).atan2(m.m11 - m.m22);
        if theta < T::zero() {
            theta = theta + T::PI();
        }
        if theta >= T::PI() {
            theta = theta - T::PI();
        }
        Self {
            lam1: mean - radius,
            lam2: mean + radius,
            theta_e: theta,
        }
    }

    pub fn eigenvalues(&self) -> [T; 2] {
        [self.lam1, self.lam2]
    }

    /// Unit eigenvector of `lam1`.
    pub fn vec1(&self) -> Vec2<T> {
        let (s, c) = self.theta_e.sin_cos();
        [-s, c]
    }

    /// Unit eigenvector of `lam2`.
    pub fn vec2(&self) -> Vec2<T> {
        let (s, c) = self.theta_e.sin_cos();
        [c, s]
    }

    /// Builds `V diag(mu1, mu2) Vᵀ` in this eigenbasis.
    pub fn compose(&self, mu1: T, mu2: T) -> SymMat2<T> {
        let mean = T::half() * (mu1 + mu2);
        let half = T::half() * (mu2 - mu1);
        let (s2, c2) = (T::two() * self.theta_e).sin_cos();
        SymMat2::new(mean + half * c2, half * s2, mean - half * c2)
    }

    pub fn reconstruct(&self) -> SymMat2<T> {
        self.compose(self.lam1, self.lam2)
    }

    /// Spectral functional calculus `f(M)`.
    pub fn map(&self, f: impl Fn(T) -> T) -> SymMat2<T> {
        self.compose(f(self.lam1), f(self.lam2))
    }

    pub fn try_map<E>(&self, f: impl Fn(T) -> Result<T, E>) -> Result<SymMat2<T>, E> {
        Ok(self.compose(f(self.lam1)?, f(self.lam2)?))
    }
}

/// Positive-definite square root via the spectrum. Returns `None` unless both
/// eigenvalues are strictly positive.
pub fn sqrt_pd<T: Real>(m: &SymMat2<T>) -> Option<SymMat2<T>> {
    let sp = m.eigs();
    (sp.lam1 > T::zero()).then(|| sp.map(|l| l.sqrt()))
}

/// Inverse via the spectrum; `None` for singular input.
pub fn inverse<T: Real>(m: &SymMat2<T>) -> Option<SymMat2<T>> {
    let sp = m.eigs();
    let scale = sp.lam1.abs().max(sp.lam2.abs());
    if sp.lam1.abs().min(sp.lam2.abs()) <= scale * T::epsilon() * T::lit(16.0) {
        return None;
    }
    Some(sp.map(|l| l.recip()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn diagonal_is_axis_aligned() {
        let sp = SymMat2::<f64>::diag(2.0, 1.0).eigs();
        assert_eq!((sp.lam1, sp.lam2), (1.0, 2.0));
        assert_eq!(sp.theta_e, 0.0);
        let v1 = sp.vec1();
        assert_relative_eq!(v1[0].abs(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn off_diagonal_swap() {
        let sp = SymMat2::new(0.0, 1.0, 0.0).eigs();
        assert_relative_eq!(sp.lam1, -1.0, epsilon = 1e-15);
        assert_relative_eq!(sp.lam2, 1.0, epsilon = 1e-15);
        assert_relative_eq!(sp.theta_e, FRAC_PI_4, epsilon = 1e-15);
    }

    #[test]
    fn isotropic_matrix() {
        let sp = SymMat2::scaled_identity(3.0).eigs();
        assert_eq!((sp.lam1, sp.lam2), (3.0, 3.0));
        assert_eq!(sp.reconstruct(), SymMat2::scaled_identity(3.0));
    }

    #[test]
    fn sqrt_and_inverse() {
        let m = SymMat2::new(4.0, 1.0, 3.0);
        let r = sqrt_pd(&m).unwrap();
        let rr = r.square();
        assert_relative_eq!(rr.m11, m.m11, epsilon = 1e-13);
        assert_relative_eq!(rr.m12, m.m12, epsilon = 1e-13);
        assert_relative_eq!(rr.m22, m.m22, epsilon = 1e-13);
        let inv = inverse(&m).unwrap();
        let id = m.product(&inv).sub(&Mat2::identity());
        assert!(id.norm_inf() < 1e-14);
        assert!(sqrt_pd(&SymMat2::diag(1.0, -1.0)).is_none());
        assert!(inverse(&SymMat2::diag(1.0, 0.0)).is_none());
    }

    #[test]
    fn congruence_matches_product() {
        let m = SymMat2::new(1.0, -0.5, 2.0);
        let s = SymMat2::new(2.0, 0.3, 1.0);
        let c = m.congruence(&s);
        let full = s.as_mat().mul(&m.as_mat()).mul(&s.as_mat());
        assert_relative_eq!(c.m11, full.0[0][0], epsilon = 1e-14);
        assert_relative_eq!(c.m12, full.0[1][0], epsilon = 1e-14);
        assert_relative_eq!(c.m22, full.0[1][1], epsilon = 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let sp = SymMat2::new(2.0f32, 0.5, -1.0).eigs();
        let m = sp.reconstruct();
        assert!((m.m11 - 2.0).abs() < 1e-5);
        assert!((m.m12 - 0.5).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn reconstruction_is_exact(a in -1e3f64..1e3, b in -1e3f64..1e3, c in -1e3f64..1e3) {
            let m = SymMat2::new(a, b, c);
            let sp = m.eigs();
            prop_assert!(sp.lam1 <= sp.lam2);
            prop_assert!(sp.theta_e >= 0.0 && sp.theta_e < std::f64::consts::PI);
            let r = sp.reconstruct();
            let scale = m.max_abs().max(1e-300);
            prop_assert!((r - m).max_abs() <= 1e-12 * scale);
        }
    }
}
