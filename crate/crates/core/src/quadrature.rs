//! Quadrature rules: adaptive Gauss–Kronrod for smooth integrands given as
//! closures, and fourth-order interval rules for uniformly sampled data.

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("QUADRATURE_NOT_CONVERGED: estimated error {error:e} after {intervals} subintervals")]
    NotConverged { error: f64, intervals: usize },
    #[error("NON_FINITE_INTEGRAND: integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("TOO_FEW_SAMPLES: {0} samples, need at least 4")]
    TooFewSamples(usize),
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (7-point rule).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;
const MAX_TAIL_PANELS: usize = 400;

/// Result of one GK15 panel: (Kronrod estimate, |Kronrod − Gauss|).
fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> Result<(T, T), QuadratureError> {
    let center = T::half() * (a + b);
    let half = T::half() * (b - a);
    let eval = |x: T| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFinite { x: x.as_f64() })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * T::lit(KRONROD_WEIGHTS[7]);
    let mut gauss = fc * T::lit(GAUSS_WEIGHTS[3]);
    for i in 0..7 {
        let dx = half * T::lit(GK_NODES[i]);
        let pair = eval(center - dx)? + eval(center + dx)?;
        kronrod = kronrod + T::lit(KRONROD_WEIGHTS[i]) * pair;
        if i % 2 == 1 {
            gauss = gauss + T::lit(GAUSS_WEIGHTS[i / 2]) * pair;
        }
    }
    Ok((kronrod * half, ((kronrod - gauss) * half).abs()))
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]` to absolute
/// tolerance `abs_tol` or relative tolerance `rel_tol`, whichever is looser.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, abs_tol: T, rel_tol: T) -> Result<T, QuadratureError> {
    if a == b {
        return Ok(T::zero());
    }
    let mut panels = vec![(a, b, gk15(&f, a, b)?)];
    loop {
        let (total, err) = panels
            .iter()
            .fold((T::zero(), T::zero()), |(s, e), p| (s + p.2 .0, e + p.2 .1));
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(QuadratureError::NotConverged {
                error: err.as_f64(),
                intervals: panels.len(),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.partial_cmp(&y.1 .2 .1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _) = panels.swap_remove(worst);
        let mid = T::half() * (lo + hi);
        if !(mid > lo.min(hi) && mid < lo.max(hi)) {
            return Err(QuadratureError::NotConverged {
                error: err.as_f64(),
                intervals: panels.len(),
            });
        }
        panels.push((lo, mid, gk15(&f, lo, mid)?));
        panels.push((mid, hi, gk15(&f, mid, hi)?));
    }
}

/// `∫_a^∞ f` over panels of doubling width. Once successive panel ratios
/// settle the remaining panels are summed as a geometric series, which is
/// exact for power-law tails.
pub fn integrate_to_infinity<T: Real, F: Fn(T) -> T>(f: F, a: T, abs_tol: T, rel_tol: T) -> Result<T, QuadratureError> {
    let mut width = a.abs().max(T::one());
    let mut lo = a;
    let mut total = T::zero();
    let mut prev: Option<T> = None;
    let mut prev_ratio: Option<T> = None;
    for _ in 0..MAX_TAIL_PANELS {
        let hi = lo + width;
        let part = integrate(&f, lo, hi, abs_tol * T::lit(1e-3), rel_tol)?;
        if !part.is_finite() {
            return Err(QuadratureError::NonFinite { x: hi.as_f64() });
        }
        total = total + part;
        if part.abs() <= abs_tol.max(rel_tol * total.abs()) * T::lit(1e-3) {
            return Ok(total);
        }
        if let Some(pv) = prev {
            let ratio = part / pv;
            if let Some(pr) = prev_ratio {
                let settled = (ratio - pr).abs() <= T::tol(1e-9) * ratio.abs();
                if settled && ratio > T::zero() && ratio < T::lit(0.9) {
                    let tail = part * ratio / (T::one() - ratio);
                    return Ok(total + tail);
                }
            }
            prev_ratio = Some(ratio);
        }
        prev = Some(part);
        lo = hi;
        width = width * T::two();
    }
    Err(QuadratureError::NotConverged {
        error: prev.map(|p| p.abs().as_f64()).unwrap_or(f64::NAN),
        intervals: MAX_TAIL_PANELS,
    })
}

/// Stencil for the integral over `[s_j, s_{j+1}]` from four uniform samples.
///
/// Returns the first sample index and the weights (to be multiplied by the
/// step). Exact for cubics.
pub fn interval_stencil(n: usize, j: usize) -> (usize, [f64; 4]) {
    debug_assert!(n >= 4 && j + 1 < n);
    if j == 0 {
        (0, [9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0])
    } else if j + 2 == n {
        (n - 4, [1.0 / 24.0, -5.0 / 24.0, 19.0 / 24.0, 9.0 / 24.0])
    } else {
        (j - 1, [-1.0 / 24.0, 13.0 / 24.0, 13.0 / 24.0, -1.0 / 24.0])
    }
}

/// `∫` over interval `j` of `g(i)`, where `g` gives the integrand at sample `i`.
pub fn interval_integral<T: Real, G: Fn(usize) -> T>(h: T, n: usize, j: usize, g: G) -> T {
    let (start, w) = interval_stencil(n, j);
    let mut acc = T::zero();
    for (i, wi) in w.iter().enumerate() {
        acc = acc + T::lit(*wi) * g(start + i);
    }
    acc * h
}

/// Running integral `∫_{s_0}^{s_j} w` on a uniform grid of step `h`.
pub fn cumulative<T: Real>(h: T, w: &[T]) -> Result<Vec<T>, QuadratureError> {
    let n = w.len();
    if n < 4 {
        return Err(QuadratureError::TooFewSamples(n));
    }
    let mut out = Vec::with_capacity(n);
    out.push(T::zero());
    let mut acc = T::zero();
    for j in 0..n - 1 {
        acc = acc + interval_integral(h, n, j, |i| w[i]);
        out.push(acc);
    }
    Ok(out)
}

/// `∫_{s_0}^{s_{n-1}} w` on a uniform grid of step `h`.
pub fn total<T: Real>(h: T, w: &[T]) -> Result<T, QuadratureError> {
    Ok(*cumulative(h, w)?.last().unwrap())
}
