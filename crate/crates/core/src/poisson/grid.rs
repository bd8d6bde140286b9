use crate::scalar::Real;

use super::PoissonError;

/// Polar tensor grid on an annulus, logarithmic in `r` and uniform in `θ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnulusGrid<T> {
    r_min: T,
    r_max: T,
    n_r: usize,
    n_theta: usize,
}

impl<T: Real> AnnulusGrid<T> {
    pub fn new(r_min: T, r_max: T, n_r: usize, n_theta: usize) -> Result<Self, PoissonError> {
        if !(r_min > T::one()) || !r_max.is_finite() || !(r_min < r_max) {
            return Err(PoissonError::InvalidGrid(format!(
                "need 1 < r_min < r_max, got r_min = {r_min}, r_max = {r_max}"
            )));
        }
        if n_r < 16 {
            return Err(PoissonError::InvalidGrid(format!("n_r = {n_r} is below 16")));
        }
        if n_theta < 8 || !n_theta.is_multiple_of(2) {
            return Err(PoissonError::InvalidGrid(format!(
                "n_theta = {n_theta} must be even and at least 8"
            )));
        }
        Ok(Self {
            r_min,
            r_max,
            n_r,
            n_theta,
        })
    }

    pub fn r_min(&self) -> T {
        self.r_min
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Step in `s = ln r`.
    pub fn h(&self) -> T {
        (self.r_max / self.r_min).ln() / T::from_count(self.n_r - 1)
    }

    pub fn dtheta(&self) -> T {
        T::TAU() / T::from_count(self.n_theta)
    }

    pub fn s(&self, j: usize) -> T {
        self.r_min.ln() + self.h() * T::from_count(j)
    }

    pub fn radius(&self, j: usize) -> T {
        if j == 0 {
            self.r_min
        } else if j + 1 == self.n_r {
            self.r_max
        } else {
            self.s(j).exp()
        }
    }

    pub fn radii(&self) -> Vec<T> {
        (0..self.n_r).map(|j| self.radius(j)).collect()
    }

    pub fn theta(&self, i: usize) -> T {
        self.dtheta() * T::from_count(i)
    }

    pub fn thetas(&self) -> Vec<T> {
        (0..self.n_theta).map(|i| self.theta(i)).collect()
    }

    /// `(cos kθᵢ, sin kθᵢ)` reduced modulo the period so large `k·i` stays exact.
    pub fn harmonic(&self, k: usize, i: usize) -> (T, T) {
        let idx = (k * i) % self.n_theta;
        let angle = self.theta(idx);
        (angle.cos(), angle.sin())
    }

    pub fn point(&self, j: usize, i: usize) -> [T; 2] {
        let r = self.radius(j);
        let (s, c) = self.theta(i).sin_cos();
        [r * c, r * s]
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Values on an [`AnnulusGrid`], radius-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: AnnulusGrid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: AnnulusGrid<T>, values: Vec<T>) -> Result<Self, PoissonError> {
        if values.len() != grid.len() {
            return Err(PoissonError::ShapeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: AnnulusGrid<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    /// Samples `f(r, θ)` at every node.
    pub fn from_polar(grid: AnnulusGrid<T>, f: impl Fn(T, T) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_r() {
            let r = grid.radius(j);
            for i in 0..grid.n_theta() {
                values.push(f(r, grid.theta(i)));
            }
        }
        Self { grid, values }
    }

    /// Samples `f(x)` at every node.
    pub fn from_cartesian(grid: AnnulusGrid<T>, f: impl Fn([T; 2]) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_r() {
            for i in 0..grid.n_theta() {
                values.push(f(grid.point(j, i)));
            }
        }
        Self { grid, values }
    }

    pub fn try_from_cartesian<E>(grid: AnnulusGrid<T>, f: impl Fn([T; 2]) -> Result<T, E>) -> Result<Self, E> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.n_r() {
            for i in 0..grid.n_theta() {
                values.push(f(grid.point(j, i))?);
            }
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &AnnulusGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, j: usize, i: usize) -> T {
        self.values[j * self.grid.n_theta() + i]
    }

    pub fn set(&mut self, j: usize, i: usize, v: T) {
        let n = self.grid.n_theta();
        self.values[j * n + i] = v;
    }

    /// Samples on the circle of radius `grid.radius(j)`.
    pub fn circle(&self, j: usize) -> &[T] {
        let n = self.grid.n_theta();
        &self.values[j * n..(j + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PoissonError> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| *a - *b).collect(),
        })
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    fn check_same_grid(&self, other: &Self) -> Result<(), PoissonError> {
        if self.grid != other.grid {
            return Err(PoissonError::GridMismatch);
        }
        Ok(())
    }
}

/// `‖v(r_j ·)‖_{L²(S¹)}` at every radius.
pub fn circle_norms<T: Real>(field: &ScalarField<T>) -> Vec<T> {
    let g = field.grid();
    (0..g.n_r())
        .map(|j| {
            let ss = field.circle(j).iter().fold(T::zero(), |a, v| a + *v * *v);
            (ss * g.dtheta()).sqrt()
        })
        .collect()
}

/// Max over interior radial nodes of `|Δ_h v − g|`, with
/// `Δ = r⁻²(∂²_s + ∂²_θ)` discretized by central differences.
pub fn laplacian_residual<T: Real>(v: &ScalarField<T>, g: &ScalarField<T>) -> Result<T, PoissonError> {
    v.check_same_grid(g)?;
    let grid = v.grid();
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    if nr < 3 || nt < 4 {
        return Err(PoissonError::GridTooCoarse { n_r: nr, n_theta: nt });
    }
    let h2 = grid.h() * grid.h();
    let t2 = grid.dtheta() * grid.dtheta();
    let mut worst = T::zero();
    for j in 1..nr - 1 {
        let r = grid.radius(j);
        let r2 = r * r;
        for i in 0..nt {
            let ip = (i + 1) % nt;
            let im = (i + nt - 1) % nt;
            let c = v.get(j, i);
            let vss = (v.get(j + 1, i) - c - c + v.get(j - 1, i)) / h2;
            let vtt = (v.get(j, ip) - c - c + v.get(j, im)) / t2;
            let res = ((vss + vtt) / r2 - g.get(j, i)).abs();
            worst = worst.max(res);
        }
    }
    Ok(worst)
}

/// `∂_r v` by second-order differences in `s = ln r`.
pub fn radial_derivative<T: Real>(v: &ScalarField<T>) -> ScalarField<T> {
    let grid = *v.grid();
    let (nr, nt) = (grid.n_r(), grid.n_theta());
    let h = grid.h();
    let mut out = ScalarField::zeros(grid);
    let three = T::lit(3.0);
    let four = T::lit(4.0);
    for j in 0..nr {
        let r = grid.radius(j);
        for i in 0..nt {
            let ds = if j == 0 {
                (-three * v.get(0, i) + four * v.get(1, i) - v.get(2, i)) / (T::two() * h)
            } else if j + 1 == nr {
                (three * v.get(j, i) - four * v.get(j - 1, i) + v.get(j - 2, i)) / (T::two() * h)
            } else {
                (v.get(j + 1, i) - v.get(j - 1, i)) / (T::two() * h)
            };
            out.set(j, i, ds / r);
        }
    }
    out
}
