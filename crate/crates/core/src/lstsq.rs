//! Dense linear least squares by Householder QR on column-equilibrated
//! designs, with a singular-value condition estimate.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LstsqError {
    #[error("SHAPE_MISMATCH: design has {rows} rows but {values} observations")]
    Shape { rows: usize, values: usize },
    #[error("UNDERDETERMINED: {rows} rows for {cols} unknowns")]
    Underdetermined { rows: usize, cols: usize },
    #[error("ILL_CONDITIONED: column {column} is numerically dependent on the others")]
    RankDeficient { column: usize },
}

/// Row-major design matrix.
#[derive(Clone, Debug)]
pub struct Design<T> {
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Design<T> {
    pub fn new(cols: usize) -> Self {
        Self { cols, data: Vec::new() }
    }

    pub fn push_row(&mut self, row: &[T]) {
        assert_eq!(row.len(), self.cols, "row width");
        self.data.extend_from_slice(row);
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.cols).unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Clone, Debug)]
pub struct LstsqSolution<T> {
    pub coef: Vec<T>,
    pub residuals: Vec<T>,
    /// 2-norm condition number of the equilibrated design.
    pub condition: T,
}

impl<T: Real> LstsqSolution<T> {
    pub fn residual_norm(&self) -> T {
        self.residuals.iter().fold(T::zero(), |acc, r| acc.hypot(*r))
    }
}

pub fn lstsq<T: Real>(design: &Design<T>, y: &[T]) -> Result<LstsqSolution<T>, LstsqError> {
    let (n, m) = (design.rows(), design.cols());
    if y.len() != n {
        return Err(LstsqError::Shape {
            rows: n,
            values: y.len(),
        });
    }
    if n < m || m == 0 {
        return Err(LstsqError::Underdetermined { rows: n, cols: m });
    }

    let mut cols: Vec<Vec<T>> = (0..m)
        .map(|j| (0..n).map(|i| design.data[i * m + j]).collect())
        .collect();
    let mut scale = vec![T::one(); m];
    for (j, c) in cols.iter_mut().enumerate() {
        let norm = norm2(c);
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(LstsqError::RankDeficient { column: j });
        }
        scale[j] = norm.recip();
        for v in c.iter_mut() {
            *v = *v * scale[j];
        }
    }
    let mut rhs = y.to_vec();

    for k in 0..m {
        let alpha = {
            let tail = &cols[k][k..];
            let norm = norm2(tail);
            if tail[0] > T::zero() {
                -norm
            } else {
                norm
            }
        };
        let mut v: Vec<T> = cols[k][k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm = norm2(&v);
        if vnorm > T::zero() {
            for x in v.iter_mut() {
                *x = *x / vnorm;
            }
            for c in cols.iter_mut().skip(k) {
                reflect(&v, &mut c[k..]);
            }
            reflect(&v, &mut rhs[k..]);
        }
    }

    let r: Vec<Vec<T>> = (0..m)
        .map(|i| (0..m).map(|j| if j >= i { cols[j][i] } else { T::zero() }).collect())
        .collect();
    let condition = condition_number(&r);
    let tiny = T::epsilon() * T::from_count(n.max(m));
    for (i, row) in r.iter().enumerate() {
        if row[i].abs() <= tiny {
            return Err(LstsqError::RankDeficient { column: i });
        }
    }

    let mut z = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut acc = rhs[i];
        for j in i + 1..m {
            acc = acc - r[i][j] * z[j];
        }
        z[i] = acc / r[i][i];
    }
    let coef: Vec<T> = z.iter().zip(&scale).map(|(zi, s)| *zi * *s).collect();

    let residuals = (0..n)
        .map(|i| {
            let fitted = design
                .row(i)
                .iter()
                .zip(&coef)
                .fold(T::zero(), |acc, (a, c)| acc + *a * *c);
            y[i] - fitted
        })
        .collect();
    Ok(LstsqSolution {
        coef,
        residuals,
        condition,
    })
}

fn norm2<T: Real>(v: &[T]) -> T {
    let big = v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    if big == T::zero() {
        return T::zero();
    }
    let sum = v.iter().fold(T::zero(), |acc, x| {
        let s = *x / big;
        acc + s * s
    });
    big * sum.sqrt()
}

fn reflect<T: Real>(v: &[T], x: &mut [T]) {
    let dot = v.iter().zip(x.iter()).fold(T::zero(), |acc, (a, b)| acc + *a * *b);
    let two = T::two() * dot;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi = *xi - two * *vi;
    }
}

/// Ratio of extreme singular values by one-sided Jacobi on a square matrix
/// given as rows.
pub fn condition_number<T: Real>(rows: &[Vec<T>]) -> T {
    let m = rows.len();
    if m == 0 {
        return T::one();
    }
    let mut cols: Vec<Vec<T>> = (0..m).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in p + 1..m {
                let alpha = cols[p].iter().fold(T::zero(), |a, x| a + *x * *x);
                let beta = cols[q].iter().fold(T::zero(), |a, x| a + *x * *x);
                let gamma = cols[p].iter().zip(&cols[q]).fold(T::zero(), |a, (x, y)| a + *x * *y);
                if gamma.abs() <= T::epsilon() * (alpha * beta).sqrt() || gamma == T::zero() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::two() * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = (T::one() + t * t).sqrt().recip();
                let s = c * t;
                let (head, tail) = cols.split_at_mut(q);
                for (xp, xq) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    (*xp, *xq) = (c * *xp - s * *xq, s * *xp + c * *xq);
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sv: Vec<T> = cols.iter().map(|c| norm2(c)).collect();
    let hi = sv.iter().fold(T::zero(), |a, x| a.max(*x));
    let lo = sv.iter().fold(T::infinity(), |a, x| a.min(*x));
    if lo > T::zero() {
        hi / lo
    } else {
        T::infinity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line() {
        let mut d = Design::new(2);
        let mut y = Vec::new();
        for i in 0..10 {
            let x = i as f64;
            d.push_row(&[1.0, x]);
            y.push(3.0 - 2.0 * x);
        }
        let s = lstsq(&d, &y).unwrap();
        assert_relative_eq!(s.coef[0], 3.0, epsilon = 1e-13);
        assert_relative_eq!(s.coef[1], -2.0, epsilon = 1e-13);
        assert!(s.residual_norm() < 1e-12);
    }

    #[test]
    fn graded_columns() {
        let mut d = Design::new(3);
        let mut y = Vec::new();
        for i in 0..40 {
            let r = 10f64.powf(2.0 + 2.0 * i as f64 / 39.0);
            d.push_row(&[r * r, r.ln(), r.recip()]);
            y.push(0.5 * r * r + 0.3 * r.ln() + 0.1 / r);
        }
        let s = lstsq(&d, &y).unwrap();
        assert_relative_eq!(s.coef[0], 0.5, max_relative = 1e-14);
        assert_relative_eq!(s.coef[1], 0.3, max_relative = 1e-7);
        // the data itself is rounded at about 1e-8 absolute
        assert_relative_eq!(s.coef[2], 0.1, max_relative = 1e-4);
    }

    #[test]
    fn identity_condition() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_relative_eq!(condition_number(&rows), 1.0);
        let rows = vec![vec![4.0, 0.0], vec![0.0, 0.5]];
        assert_relative_eq!(condition_number(&rows), 8.0, epsilon = 1e-12);
        let rows = vec![vec![1.0, 1.0], vec![0.0, 1e-3]];
        let c = condition_number(&rows);
        // singular values of [[1,1],[0,ε]] have ratio ≈ 2/ε
        assert_relative_eq!(c, 2e3, max_relative = 1e-3);
    }

    #[test]
    fn dependent_columns_rejected() {
        let mut d = Design::new(2);
        for i in 0..5 {
            let x = i as f64;
            d.push_row(&[x, 2.0 * x]);
        }
        assert!(matches!(lstsq(&d, &[0.0; 5]), Err(LstsqError::RankDeficient { .. })));
        assert!(lstsq(&d, &[0.0; 4]).is_err());
    }
}
