//! Kummer's confluent hypergeometric function and the complementary error function.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Stopping rule for power series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesAccuracy {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl SeriesAccuracy {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol < 1e-6) {
            return Err(Error::InvalidParameter(format!("rel_tol {rel_tol} must lie in (0, 1e-6)")));
        }
        if max_terms < 100 {
            return Err(Error::InvalidParameter(format!("max_terms {max_terms} must be at least 100")));
        }
        Ok(SeriesAccuracy { rel_tol, max_terms })
    }
}

impl Default for SeriesAccuracy {
    fn default() -> Self {
        SeriesAccuracy { rel_tol: 1e-15, max_terms: 2000 }
    }
}

/// Largest |z| accepted by [`kummer_m`].
pub const KUMMER_Z_MAX: f64 = 50.0;

/// Kummer's function M(a, b, z) = Σ (a)ₙ/(b)ₙ zⁿ/n!.
///
/// Negative arguments go through M(a,b,z) = eᶻ M(b−a, b, −z) so that the
/// summed series has no sign alternation when b > a.
pub fn kummer_m(a: f64, b: f64, z: f64, acc: SeriesAccuracy) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && z.is_finite()) {
        return Err(Error::InvalidParameter("non-finite argument to kummer_m".into()));
    }
    if b <= 0.0 && b == b.round() {
        return Err(Error::InvalidParameter(format!("b = {b} is a non-positive integer")));
    }
    if z.abs() > KUMMER_Z_MAX {
        return Err(Error::InvalidParameter(format!("|z| = {} exceeds {KUMMER_Z_MAX}", z.abs())));
    }
    if z < 0.0 {
        Ok(z.exp() * kummer_series(b - a, b, -z, acc)?)
    } else {
        kummer_series(a, b, z, acc)
    }
}

/// Direct summation of the defining series.
pub fn kummer_series(a: f64, b: f64, z: f64, acc: SeriesAccuracy) -> Result<f64> {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for n in 0..acc.max_terms {
        let nf = n as f64;
        let ratio = (a + nf) / (b + nf) * z / (nf + 1.0);
        term *= ratio;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        // Once the term ratio has dropped below 1/2 (and keeps decreasing,
        // which holds for n > |z| + |a| + |b|), the tail is bounded by the
        // current term.
        let settled = nf + 1.0 > z.abs() + a.abs() + b.abs();
        if settled && ratio.abs() < 0.5 && term.abs() <= acc.rel_tol * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::NonConvergence(format!(
        "M({a}, {b}, {z}) not converged after {} terms",
        acc.max_terms
    )))
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.0 {
        1.0 - erf_series(x)
    } else {
        (-x * x).exp() * erfc_cf(x)
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.abs() < 2.0 {
        erf_series(x)
    } else {
        1.0 - erfc(x)
    }
}

/// Scaled complementary error function e^{x²} erfc(x) for x ≥ 0.
pub fn erfcx(x: f64) -> f64 {
    if x < 2.0 {
        (x * x).exp() * erfc(x)
    } else {
        erfc_cf(x)
    }
}

fn erf_series(x: f64) -> f64 {
    // erf x = 2/√π e^{−x²} Σ 2ⁿ x^{2n+1} / (1·3·…·(2n+1)); all terms positive.
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

/// e^{x²} erfc(x) via the Laplace continued fraction, evaluated with the
/// modified Lentz method. Valid for x ≥ 2.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    // 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..500 {
        let an = n as f64 / 2.0;
        d = x + an * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kummer_trivial_values() {
        let acc = SeriesAccuracy::default();
        assert_eq!(kummer_m(0.7, 1.9, 0.0, acc).unwrap(), 1.0);
        let e1 = std::f64::consts::E - 1.0;
        assert!((kummer_m(1.0, 2.0, 1.0, acc).unwrap() - e1).abs() < 1e-14);
    }

    #[test]
    fn kummer_rejects_bad_b_and_large_z() {
        let acc = SeriesAccuracy::default();
        assert!(matches!(kummer_m(1.0, -2.0, 0.5, acc), Err(Error::InvalidParameter(_))));
        assert!(matches!(kummer_m(1.0, 0.0, 0.5, acc), Err(Error::InvalidParameter(_))));
        assert!(matches!(kummer_m(1.0, 2.0, 51.0, acc), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn kummer_reports_non_convergence() {
        let acc = SeriesAccuracy { rel_tol: 1e-15, max_terms: 100 };
        assert!(matches!(kummer_m(1.0, 1.5, 49.0, acc), Err(Error::NonConvergence(_))));
    }

    #[test]
    fn accuracy_validation() {
        assert!(SeriesAccuracy::new(1e-3, 200).is_err());
        assert!(SeriesAccuracy::new(1e-10, 50).is_err());
        assert!(SeriesAccuracy::new(1e-10, 100).is_ok());
    }

    #[test]
    fn erfc_known_values() {
        assert_eq!(erfc(0.0), 1.0);
        let v = erfc(10.0);
        assert!(v >= 0.0 && v < 1e-44);
        assert!((erfc(0.5) - 0.479_500_122_186_953_5).abs() < 1e-15);
        assert!((erfc(3.0) / 2.209_049_699_858_544e-5 - 1.0).abs() < 1e-13);
        assert!((erfcx(5.0) - (25f64).exp() * erfc(5.0)).abs() < 1e-14);
    }
}
