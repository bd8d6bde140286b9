use rayon::prelude::*;

use crate::quadrature::interval_stencil;
use crate::scalar::Real;

use super::decay::{measure_field_decay, DecayClass, MeasuredDecay};
use super::grid::{AnnulusGrid, ScalarField};
use super::modes::{assemble, fourier_decompose, FourierModes};
use super::PoissonError;

const DEFAULT_K_MAX: usize = 16;

type ModeResult<T> = Result<(usize, usize, Vec<T>), PoissonError>;
const DEFAULT_SKIP: f64 = 1e-14;
const INTEGER_SNAP: f64 = 1e-9;
const SERIES_SWITCH: f64 = 0.1;

/// Lower limit of one Wronskian integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    Finite,
    Infinite,
}

/// Endpoints for the `τ^{1−k}` and `τ^{1+k}` integrals of mode `k`. For
/// `k = 0` these are the `τ` and `τ ln τ` integrals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EndpointPolicy {
    pub first: Endpoint,
    pub second: Endpoint,
}

/// Where finite lower limits sit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Anchor {
    /// `r = 1`; the part below the grid is extrapolated as a power law.
    #[default]
    UnitCircle,
    /// The first grid radius.
    GridStart,
}

fn snap_integer<T: Real>(x: T) -> T {
    let r = x.round();
    if (x - r).abs() < T::lit(INTEGER_SNAP) {
        r
    } else {
        x
    }
}

/// An integral runs from infinity exactly when it converges absolutely there.
pub fn endpoint_policy<T: Real>(k: usize, dc: &DecayClass<T>) -> EndpointPolicy {
    let k1 = snap_integer(dc.k1());
    let kk = T::from_count(k);
    let pick = |converges: bool| {
        if converges {
            Endpoint::Infinite
        } else {
            Endpoint::Finite
        }
    };
    if k == 0 {
        let e = pick(k1 > T::two());
        EndpointPolicy { first: e, second: e }
    } else {
        EndpointPolicy {
            first: pick(kk + k1 > T::two()),
            second: pick(k1 > kk + T::two()),
        }
    }
}

/// `∫_ε^1 t^m dt`.
fn head_power<T: Real>(m: T, eps: T) -> T {
    let mu = m + T::one();
    let l = eps.ln();
    if mu == T::zero() {
        -l
    } else {
        -(mu * l).exp_m1() / mu
    }
}

/// `∫_ε^1 −t^m ln t dt`.
fn head_log<T: Real>(m: T, eps: T) -> T {
    let l = eps.ln();
    let x = (m + T::one()) * l;
    // (1 − eˣ + x eˣ)/x² = Σ_{n≥2} (n−1)/n! x^{n−2}
    let phi = if x.abs() < T::lit(SERIES_SWITCH) {
        let mut term = T::one();
        let mut fact = T::two();
        let mut acc = T::half();
        for n in 3..16 {
            term = term * x;
            fact = fact * T::from_count(n);
            acc = acc + T::from_count(n - 1) * term / fact;
        }
        acc
    } else {
        let ex = x.exp();
        (T::one() - ex + x * ex) / (x * x)
    };
    l * l * phi
}

/// Log-log slope over `range`, or `None` on a sign change or zero sample.
fn edge_exponent<T: Real>(r: &[T], b: &[T], range: std::ops::Range<usize>) -> Option<T> {
    let slice = &b[range.clone()];
    let first = *slice.first()?;
    if first == T::zero()
        || slice
            .iter()
            .any(|v| *v == T::zero() || (*v > T::zero()) != (first > T::zero()))
    {
        return None;
    }
    let n = T::from_count(range.len());
    let (mut sx, mut sy, mut sxx, mut sxy) = (T::zero(), T::zero(), T::zero(), T::zero());
    for i in range {
        let x = r[i].ln();
        let y = b[i].abs().ln();
        sx = sx + x;
        sy = sy + y;
        sxx = sxx + x * x;
        sxy = sxy + x * y;
    }
    let den = n * sxx - sx * sx;
    if !(den > T::zero()) {
        return None;
    }
    let slope = (n * sxy - sx * sy) / den;
    slope.is_finite().then_some(-slope)
}

fn decade_len<T: Real>(grid: &AnnulusGrid<T>) -> usize {
    let per_decade = (T::lit(10.0).ln() / grid.h()).ceil().to_usize().unwrap_or(4);
    per_decade.clamp(4, grid.n_r())
}

/// `X(s) = e^{c(s−s₀)} X₀ + ∫_{s₀}^{s} e^{c(s−σ)} W(σ) dσ`.
fn sweep_forward<T: Real>(h: T, c: T, w: &[T], x0: T) -> Vec<T> {
    let n = w.len();
    let mut x = vec![T::zero(); n];
    x[0] = x0;
    let grow = (c * h).exp();
    for j in 0..n - 1 {
        let (start, wt) = interval_stencil(n, j);
        let mut local = T::zero();
        for (l, wl) in wt.iter().enumerate() {
            let idx = start + l;
            let lag = T::from_count(j + 1) - T::from_count(idx);
            local = local + T::lit(*wl) * (c * h * lag).exp() * w[idx];
        }
        x[j + 1] = grow * x[j] + h * local;
    }
    x
}

/// `X(s) = −∫_{s}^{∞} e^{c(s−σ)} W(σ) dσ`, given the tail value at the last node.
fn sweep_backward<T: Real>(h: T, c: T, w: &[T], x_last: T) -> Vec<T> {
    let n = w.len();
    let mut x = vec![T::zero(); n];
    x[n - 1] = x_last;
    let shrink = (-c * h).exp();
    for j in (0..n - 1).rev() {
        let (start, wt) = interval_stencil(n, j);
        let mut local = T::zero();
        for (l, wl) in wt.iter().enumerate() {
            let idx = start + l;
            let lead = T::from_count(j) - T::from_count(idx);
            local = local + T::lit(*wl) * (c * h * lead).exp() * w[idx];
        }
        x[j] = shrink * x[j + 1] - h * local;
    }
    x
}

struct ModeContext<'a, T> {
    k: usize,
    r: Vec<T>,
    w: Vec<T>,
    b: &'a [T],
    h: T,
    head_q: T,
    tail_q: T,
    anchor: Anchor,
}

impl<T: Real> ModeContext<'_, T> {
    fn eps(&self) -> T {
        self.r[0].recip()
    }

    /// `∫_{anchor}^{r₀} e^{c(s₀−σ)} W dσ` from the power-law head.
    fn head(&self, c: T) -> T {
        match self.anchor {
            Anchor::GridStart => T::zero(),
            Anchor::UnitCircle => {
                let r0 = self.r[0];
                self.b[0] * r0 * r0 * head_power(T::one() - c - self.head_q, self.eps())
            }
        }
    }

    /// `−∫_R^∞ e^{c(S−σ)} W dσ` from the power-law tail.
    fn tail(&self, c: T, which: &'static str) -> Result<T, PoissonError> {
        let n = self.r.len();
        let rate = self.tail_q + c - T::two();
        if !(rate > T::zero()) {
            return Err(PoissonError::TailDivergent {
                k: self.k,
                q: self.tail_q.as_f64(),
                integral: which,
            });
        }
        Ok(-self.w[n - 1] / rate)
    }

    fn exponent_integral(&self, c: T, end: Endpoint, which: &'static str) -> Result<Vec<T>, PoissonError> {
        Ok(match end {
            Endpoint::Finite => sweep_forward(self.h, c, &self.w, self.head(c)),
            Endpoint::Infinite => sweep_backward(self.h, c, &self.w, self.tail(c, which)?),
        })
    }

    /// `a₀(r) = ∫ τ ln(r/τ) b(τ) dτ` from the common endpoint.
    fn log_kernel(&self, end: Endpoint) -> Result<Vec<T>, PoissonError> {
        let (h, w, n) = (self.h, &self.w, self.r.len());
        match end {
            Endpoint::Finite => {
                let m = self.exponent_integral(T::zero(), end, "tau")?;
                let mut a = vec![T::zero(); n];
                a[0] = match self.anchor {
                    Anchor::GridStart => T::zero(),
                    Anchor::UnitCircle => {
                        let r0 = self.r[0];
                        self.b[0] * r0 * r0 * head_log(T::one() - self.head_q, self.eps())
                    }
                };
                for j in 0..n - 1 {
                    let (start, wt) = interval_stencil(n, j);
                    let mut local = T::zero();
                    for (l, wl) in wt.iter().enumerate() {
                        let idx = start + l;
                        let lag = T::from_count(j + 1) - T::from_count(idx);
                        local = local + T::lit(*wl) * lag * h * w[idx];
                    }
                    a[j + 1] = a[j] + h * m[j] + h * local;
                }
                Ok(a)
            }
            Endpoint::Infinite => {
                let minus_n = self.exponent_integral(T::zero(), end, "tau")?;
                let q2 = self.tail_q - T::two();
                let mut a = vec![T::zero(); n];
                a[n - 1] = self.w[n - 1] / (q2 * q2);
                for j in (0..n - 1).rev() {
                    let (start, wt) = interval_stencil(n, j);
                    let mut local = T::zero();
                    for (l, wl) in wt.iter().enumerate() {
                        let idx = start + l;
                        let lead = T::from_count(idx) - T::from_count(j);
                        local = local + T::lit(*wl) * lead * h * w[idx];
                    }
                    a[j] = a[j + 1] - h * minus_n[j + 1] + h * local;
                }
                Ok(a)
            }
        }
    }
}

/// Particular solution of `a″ + a′/r − k²a/r² = b` on the grid radii.
pub fn mode_particular_solution<T: Real>(
    k: usize,
    b_k: &[T],
    grid: &AnnulusGrid<T>,
    dc: &DecayClass<T>,
    anchor: Anchor,
) -> Result<Vec<T>, PoissonError> {
    let n = grid.n_r();
    if b_k.len() != n {
        return Err(PoissonError::ShapeMismatch {
            expected: n,
            found: b_k.len(),
        });
    }
    let r = grid.radii();
    let w: Vec<T> = r.iter().zip(b_k).map(|(ri, bi)| *ri * *ri * *bi).collect();
    let decade = decade_len(grid);
    let k1 = snap_integer(dc.k1());
    let head_q = edge_exponent(&r, b_k, 0..decade).unwrap_or(k1);
    let tail_q = edge_exponent(&r, b_k, n - decade..n).unwrap_or(k1);
    let ctx = ModeContext {
        k,
        r,
        w,
        b: b_k,
        h: grid.h(),
        head_q,
        tail_q,
        anchor,
    };
    let policy = endpoint_policy(k, dc);
    if k == 0 {
        return ctx.log_kernel(policy.first);
    }
    let kk = T::from_count(k);
    let j1 = ctx.exponent_integral(kk, policy.first, "tau^(1-k)")?;
    let j2 = ctx.exponent_integral(-kk, policy.second, "tau^(1+k)")?;
    let scale = (T::two() * kk).recip();
    Ok(j1.iter().zip(&j2).map(|(a, b)| (*a - *b) * scale).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonOptions<T> {
    /// Highest harmonic; `None` takes the smaller of 16 and `n_theta/2 − 1`.
    pub k_max: Option<usize>,
    pub anchor: Anchor,
    /// Modes below this fraction of `max|g|` are skipped. The default is
    /// `1e-14`, raised to `16ε` for narrower scalars.
    pub skip_rel: T,
    /// Source class; measured from the data when `None`.
    pub class: Option<DecayClass<T>>,
}

impl<T: Real> Default for PoissonOptions<T> {
    fn default() -> Self {
        Self {
            k_max: None,
            anchor: Anchor::UnitCircle,
            skip_rel: T::lit(DEFAULT_SKIP).max(T::epsilon() * T::lit(16.0)),
            class: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PoissonSolution<T> {
    pub v: ScalarField<T>,
    pub source_modes: FourierModes<T>,
    pub solution_modes: FourierModes<T>,
    pub class: DecayClass<T>,
    /// Fit of the source norms, present when the class was measured.
    pub measured: Option<MeasuredDecay<T>>,
}

/// Solves `Δv = g` mode by mode.
pub fn solve_poisson<T: Real>(
    g: &ScalarField<T>,
    opts: &PoissonOptions<T>,
) -> Result<PoissonSolution<T>, PoissonError> {
    let grid = *g.grid();
    let k_max = opts.k_max.unwrap_or_else(|| DEFAULT_K_MAX.min(grid.n_theta() / 2 - 1));
    let source_modes = fourier_decompose(g, k_max)?;
    let (class, measured) = match opts.class {
        Some(c) => (c, None),
        None => {
            let m = measure_field_decay(g)?;
            (m.class()?, Some(m))
        }
    };
    let threshold = opts.skip_rel * g.max_abs();
    let indices = source_modes.indices();
    let solved: Vec<ModeResult<T>> = indices
        .par_iter()
        .map(|&(k, m)| {
            let b = source_modes.coeff(k, m).unwrap();
            let peak = b.iter().fold(T::zero(), |a, v| a.max(v.abs()));
            if peak <= threshold {
                return Ok((k, m, vec![T::zero(); b.len()]));
            }
            mode_particular_solution(k, b, &grid, &class, opts.anchor).map(|a| (k, m, a))
        })
        .collect();
    let mut solution_modes = FourierModes::zeros(grid, k_max);
    for item in solved {
        let (k, m, a) = item?;
        solution_modes.set(k, m, a)?;
    }
    Ok(PoissonSolution {
        v: assemble(&solution_modes),
        source_modes,
        solution_modes,
        class,
        measured,
    })
}
