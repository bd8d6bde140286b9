use crate::lstsq::{lstsq, Design};
use crate::scalar::Real;

use super::grid::{circle_norms, ScalarField};
use super::PoissonError;

const MIN_SAMPLES: usize = 16;
const MIN_SPAN: f64 = 10.0;
const HALF_INTEGER_SNAP: f64 = 0.1;

/// Bound class `r^{−k₁}(ln r)^{k₂}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayClass<T> {
    k1: T,
    k2: T,
}

impl<T: Real> DecayClass<T> {
    pub fn new(k1: T, k2: T) -> Result<Self, PoissonError> {
        if !(k1 > T::zero()) || !(k2 >= T::zero()) || !k1.is_finite() || !k2.is_finite() {
            return Err(PoissonError::InvalidClass {
                k1: k1.as_f64(),
                k2: k2.as_f64(),
            });
        }
        Ok(Self { k1, k2 })
    }

    pub fn k1(&self) -> T {
        self.k1
    }

    pub fn k2(&self) -> T {
        self.k2
    }
}

/// `ln|v| ≈ ln C − p ln r + q ln ln r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogPowerFit<T> {
    pub ln_c: T,
    pub p: T,
    pub q: T,
    pub condition: T,
    /// The samples were not of one sign; the fit used magnitudes.
    pub sign_change: bool,
}

/// Regresses `ln|v|` on `(1, ln r, ln ln r)`, or on `(1, ln r)` with the log
/// power held at `fixed_q`.
pub fn log_power_fit<T: Real>(r: &[T], v: &[T], fixed_q: Option<T>) -> Result<LogPowerFit<T>, PoissonError> {
    if r.len() != v.len() {
        return Err(PoissonError::ShapeMismatch {
            expected: r.len(),
            found: v.len(),
        });
    }
    if r.len() < MIN_SAMPLES {
        return Err(PoissonError::TooFewSamples {
            found: r.len(),
            needed: MIN_SAMPLES,
        });
    }
    let lo = r.iter().fold(T::infinity(), |a, x| a.min(*x));
    let hi = r.iter().fold(T::zero(), |a, x| a.max(*x));
    if !(lo > T::one()) || !(hi >= lo * T::lit(MIN_SPAN)) {
        return Err(PoissonError::IllConditioned {
            r_lo: lo.as_f64(),
            r_hi: hi.as_f64(),
        });
    }
    if v.iter().any(|x| *x == T::zero() || !x.is_finite()) {
        return Err(PoissonError::ZeroSignal);
    }
    let positive = v.iter().filter(|x| **x > T::zero()).count();
    let sign_change = positive != 0 && positive != v.len();

    let cols = if fixed_q.is_some() { 2 } else { 3 };
    let mut design = Design::new(cols);
    let mut y = Vec::with_capacity(r.len());
    for (ri, vi) in r.iter().zip(v) {
        let lr = ri.ln();
        let mut target = vi.abs().ln();
        if let Some(q) = fixed_q {
            target = target - q * lr.ln();
            design.push_row(&[T::one(), lr]);
        } else {
            design.push_row(&[T::one(), lr, lr.ln()]);
        }
        y.push(target);
    }
    let sol = lstsq(&design, &y).map_err(|_| PoissonError::IllConditioned {
        r_lo: lo.as_f64(),
        r_hi: hi.as_f64(),
    })?;
    Ok(LogPowerFit {
        ln_c: sol.coef[0],
        p: -sol.coef[1],
        q: fixed_q.unwrap_or_else(|| sol.coef[2]),
        condition: sol.condition,
        sign_change,
    })
}

/// Fitted decay of a sampled profile; unlike [`DecayClass`] the exponent may
/// be zero or negative (growth).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasuredDecay<T> {
    pub k1: T,
    pub k2: T,
    pub c0: T,
    /// `k2` was rounded to a half-integer and `k1` refitted.
    pub snapped: bool,
}

impl<T: Real> MeasuredDecay<T> {
    pub fn class(&self) -> Result<DecayClass<T>, PoissonError> {
        DecayClass::new(self.k1, self.k2.max(T::zero()))
    }
}

/// Fits `c₀ r^{−k₁}(ln r)^{k₂}` to circle norms.
pub fn measure_decay_class<T: Real>(r: &[T], norms: &[T]) -> Result<MeasuredDecay<T>, PoissonError> {
    let free = log_power_fit(r, norms, None)?;
    let half = T::half();
    let rounded = (free.q / half).round() * half + T::zero();
    if (free.q - rounded).abs() <= T::lit(HALF_INTEGER_SNAP) {
        let fixed = log_power_fit(r, norms, Some(rounded))?;
        Ok(MeasuredDecay {
            k1: fixed.p,
            k2: rounded,
            c0: fixed.ln_c.exp(),
            snapped: true,
        })
    } else {
        Ok(MeasuredDecay {
            k1: free.p,
            k2: free.q,
            c0: free.ln_c.exp(),
            snapped: false,
        })
    }
}

/// [`measure_decay_class`] on the circle norms of a field.
pub fn measure_field_decay<T: Real>(field: &ScalarField<T>) -> Result<MeasuredDecay<T>, PoissonError> {
    measure_decay_class(&field.grid().radii(), &circle_norms(field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn radii(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn pure_power() {
        let r = radii(32, 2.0, 200.0);
        let v: Vec<f64> = r.iter().map(|x| 5.0 * x.powi(-3)).collect();
        let m = measure_decay_class(&r, &v).unwrap();
        assert!((m.k1 - 3.0).abs() < 0.05);
        assert_eq!(m.k2, 0.0);
        assert_relative_eq!(m.c0, 5.0, max_relative = 1e-8);
    }

    #[test]
    fn power_with_log() {
        let r = radii(32, 2.0, 200.0);
        let v: Vec<f64> = r.iter().map(|x| x.powi(-2) * x.ln()).collect();
        let m = measure_decay_class(&r, &v).unwrap();
        assert!((m.k1 - 2.0).abs() < 0.05);
        assert!((m.k2 - 1.0).abs() < 0.1);
    }

    #[test]
    fn growth_allowed_in_measurement() {
        let r = radii(32, 2.0, 200.0);
        let v: Vec<f64> = r.iter().map(|x| 0.5 * x.ln().powi(2)).collect();
        let m = measure_decay_class(&r, &v).unwrap();
        assert!(m.k1.abs() < 1e-8);
        assert_eq!(m.k2, 2.0);
        let growing = MeasuredDecay { k1: -0.5, ..m };
        assert!(growing.class().is_err());
    }

    #[test]
    fn narrow_span_rejected() {
        let r = radii(32, 2.0, 15.0);
        let v: Vec<f64> = r.iter().map(|x| x.recip()).collect();
        assert!(matches!(
            measure_decay_class(&r, &v),
            Err(PoissonError::IllConditioned { .. })
        ));
        assert!(measure_decay_class(&r[..10], &v[..10]).is_err());
    }

    #[test]
    fn class_invariants() {
        assert!(DecayClass::new(0.0, 0.0).is_err());
        assert!(DecayClass::new(1.0, -1.0).is_err());
        assert!(DecayClass::new(1.5, 0.0).is_ok());
    }
}
