use crate::error::{check_finite, check_positive, Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;
use crate::quad::ErrorBounded;

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> Result<ErrorBounded> {
    check_positive("x", x)?;
    let v = libm::tgamma(x);
    Ok(ErrorBounded::series(v, 4.0 * f64::EPSILON * v.abs()))
}

/// log Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive("x", x)?;
    Ok(libm::lgamma(x))
}

/// log |Γ(a + ib)| for a ≥ 0, (a, b) ≠ (0, 0).
///
/// Shifts the argument to |z| ≥ 15 with the recurrence and sums the
/// Stirling series there.
pub fn ln_abs_gamma_complex(a: f64, b: f64) -> Result<f64> {
    check_finite("a", a)?;
    check_finite("b", b)?;
    if a < 0.0 || (a == 0.0 && b == 0.0) {
        return Err(Error::domain(format!("ln |Gamma(a+ib)| needs a >= 0 and a nonzero argument, got {a}+{b}i")));
    }
    let mut z = Complex64::new(a, b);
    let mut shift = 0.0;
    while z.norm() < 15.0 {
        shift += z.norm().ln();
        z += 1.0;
    }
    let w = z.inv();
    let w2 = w * w;
    // Bernoulli terms B_{2k} / (2k(2k-1) z^{2k-1})
    let series = w * (1.0 / 12.0 + w2 * (-1.0 / 360.0 + w2 * (1.0 / 1260.0 + w2 * (-1.0 / 1680.0 + w2 / 1188.0))));
    let ln = (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series;
    Ok(ln.re - shift)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        assert_eq!(gamma(1.0).unwrap().value, 1.0);
        assert!((gamma(0.5).unwrap().value - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!((gamma(4.0).unwrap().value - 6.0).abs() < 1e-13);
        assert!((ln_gamma(10.0).unwrap() - 362880f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn complex_argument() {
        // real axis against lgamma, imaginary axis against |Γ(ib)|² = π/(b sinh πb)
        for a in [0.3, 1.0, 7.5, 40.0] {
            assert!((ln_abs_gamma_complex(a, 0.0).unwrap() - libm::lgamma(a)).abs() < 1e-13);
        }
        for b in [0.01, 0.5, 3.0, 60.0] {
            let want = 0.5 * (PI / (b * (PI * b).sinh())).ln();
            assert!((ln_abs_gamma_complex(0.0, b).unwrap() - want).abs() < 1e-12, "{b}");
        }
        // |Γ(1/2 + ib)|² = π / cosh πb
        let want = 0.5 * (PI / (PI * 2.0f64).cosh()).ln();
        assert!((ln_abs_gamma_complex(0.5, 2.0).unwrap() - want).abs() < 1e-13);
        assert!(ln_abs_gamma_complex(-0.5, 1.0).is_err());
    }

    #[test]
    fn domain() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.5).is_err());
        assert!(gamma(f64::NAN).is_err());
        assert!(gamma(f64::INFINITY).is_err());
    }
}
