use crate::scalar::Real;

use super::grid::{AnnulusGrid, ScalarField};
use super::PoissonError;

/// Radial profiles of circle-harmonic coefficients in the orthonormal basis
/// `1/√(2π)`, `cos kθ/√π`, `sin kθ/√π`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierModes<T> {
    grid: AnnulusGrid<T>,
    k_max: usize,
    cos: Vec<Vec<T>>,
    sin: Vec<Vec<T>>,
}

impl<T: Real> FourierModes<T> {
    pub fn zeros(grid: AnnulusGrid<T>, k_max: usize) -> Self {
        let z = vec![vec![T::zero(); grid.n_r()]; k_max + 1];
        Self {
            grid,
            k_max,
            cos: z.clone(),
            sin: z,
        }
    }

    pub fn grid(&self) -> &AnnulusGrid<T> {
        &self.grid
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn r_nodes(&self) -> Vec<T> {
        self.grid.radii()
    }

    /// `b_{k,m}` samples; `m = 1` is the cosine (or constant) mode, `m = 2`
    /// the sine mode, which does not exist for `k = 0`.
    pub fn coeff(&self, k: usize, m: usize) -> Option<&[T]> {
        match (k, m) {
            (k, _) if k > self.k_max => None,
            (_, 1) => Some(&self.cos[k]),
            (0, 2) => None,
            (_, 2) => Some(&self.sin[k]),
            _ => None,
        }
    }

    pub fn set(&mut self, k: usize, m: usize, values: Vec<T>) -> Result<(), PoissonError> {
        if values.len() != self.grid.n_r() {
            return Err(PoissonError::ShapeMismatch {
                expected: self.grid.n_r(),
                found: values.len(),
            });
        }
        match (k, m) {
            (k, _) if k > self.k_max => Err(PoissonError::NoSuchMode { k, m }),
            (_, 1) => {
                self.cos[k] = values;
                Ok(())
            }
            (k, 2) if k > 0 => {
                self.sin[k] = values;
                Ok(())
            }
            _ => Err(PoissonError::NoSuchMode { k, m }),
        }
    }

    /// Every existing `(k, m)` pair in order.
    pub fn indices(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 1)];
        for k in 1..=self.k_max {
            out.push((k, 1));
            out.push((k, 2));
        }
        out
    }

    /// `Σ_{k,m} b_{k,m}(r_j)²` at each radius.
    pub fn energy(&self) -> Vec<T> {
        (0..self.grid.n_r())
            .map(|j| {
                self.indices()
                    .iter()
                    .map(|&(k, m)| {
                        let v = self.coeff(k, m).unwrap()[j];
                        v * v
                    })
                    .fold(T::zero(), |a, b| a + b)
            })
            .collect()
    }
}

/// Trapezoid projection onto the circle harmonics up to `k_max`.
pub fn fourier_decompose<T: Real>(field: &ScalarField<T>, k_max: usize) -> Result<FourierModes<T>, PoissonError> {
    let grid = *field.grid();
    let nt = grid.n_theta();
    if k_max >= nt / 2 {
        return Err(PoissonError::Aliasing { k_max, n_theta: nt });
    }
    let mut modes = FourierModes::zeros(grid, k_max);
    let dtheta = grid.dtheta();
    let norm0 = dtheta / T::TAU().sqrt();
    let normk = dtheta / T::PI().sqrt();
    for j in 0..grid.n_r() {
        let circle = field.circle(j);
        modes.cos[0][j] = circle.iter().fold(T::zero(), |a, v| a + *v) * norm0;
        for k in 1..=k_max {
            let (mut c, mut s) = (T::zero(), T::zero());
            for (i, v) in circle.iter().enumerate() {
                let (ck, sk) = grid.harmonic(k, i);
                c = c + *v * ck;
                s = s + *v * sk;
            }
            modes.cos[k][j] = c * normk;
            modes.sin[k][j] = s * normk;
        }
    }
    Ok(modes)
}

/// Synthesis `a₀/√(2π) + Σ (a_{k,1} cos kθ + a_{k,2} sin kθ)/√π` on the grid.
pub fn assemble<T: Real>(modes: &FourierModes<T>) -> ScalarField<T> {
    let grid = *modes.grid();
    let mut out = ScalarField::zeros(grid);
    let inv0 = T::TAU().sqrt().recip();
    let invk = T::PI().sqrt().recip();
    for j in 0..grid.n_r() {
        for i in 0..grid.n_theta() {
            let mut v = modes.cos[0][j] * inv0;
            for k in 1..=modes.k_max {
                let (ck, sk) = grid.harmonic(k, i);
                v = v + (modes.cos[k][j] * ck + modes.sin[k][j] * sk) * invk;
            }
            out.set(j, i, v);
        }
    }
    out
}
