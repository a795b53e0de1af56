use super::bessel_i::bessel_i;
use crate::error::{check_finite, Result};
use crate::quad::ErrorBounded;
use std::f64::consts::{FRAC_PI_4, PI};

/// Below this |z| the power series is used; above it the Hankel expansion.
/// The series loses about log10(e^z / z) digits to cancellation while the
/// asymptotic series bottoms out near e^{-2z}; 14 balances the two.
const SWITCH: f64 = 14.0;

fn series(z: f64) -> (f64, f64) {
    let q = -0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut biggest = 1.0f64;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        biggest = biggest.max(term.abs());
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 0.5 * z {
            break;
        }
        k += 1.0;
    }
    (sum, 4.0 * f64::EPSILON * biggest + 1e-17)
}

fn hankel(z: f64) -> (f64, f64) {
    // P and Q of the expansion J0 = sqrt(2/(pi z)) (P cos chi - Q sin chi)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut b = 1.0; // b_k = prod (2j-1)^2 / (k! 8^k z^k)
    let mut last = f64::INFINITY;
    let mut k = 1;
    loop {
        let m = (2 * k - 1) as f64;
        b *= m * m / (k as f64 * 8.0 * z);
        if b > last {
            break;
        }
        last = b;
        // signs: P gets (-1)^(k/2) b_k for even k, Q gets -(-1)^((k-1)/2) b_k for odd k
        match k % 4 {
            0 => p += b,
            1 => q -= b,
            2 => p -= b,
            _ => q += b,
        }
        if b < 1e-17 {
            break;
        }
        k += 1;
    }
    let chi = z - FRAC_PI_4;
    let amp = (2.0 / (PI * z)).sqrt();
    let v = amp * (p * chi.cos() - q * chi.sin());
    (v, amp * (last + 4.0 * f64::EPSILON) + f64::EPSILON * z * amp)
}

/// J₀(z).
pub fn bessel_j0(z: f64) -> Result<ErrorBounded> {
    check_finite("z", z)?;
    let z = z.abs();
    let (v, e) = if z <= SWITCH { series(z) } else { hankel(z) };
    Ok(ErrorBounded::series(v, e))
}

/// J₀(√w) for any real w; for w < 0 this is I₀(√−w).
pub fn j0_sqrt(w: f64) -> Result<f64> {
    check_finite("w", w)?;
    if w >= 0.0 {
        Ok(bessel_j0(w.sqrt())?.value)
    } else {
        Ok(bessel_i(0.0, (-w).sqrt())?.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_values() {
        assert_eq!(bessel_j0(0.0).unwrap().value, 1.0);
        assert!((bessel_j0(1.0).unwrap().value - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!(bessel_j0(2.404_825_557_695_773).unwrap().value.abs() < 1e-14);
        assert!((bessel_j0(-1.0).unwrap().value - 0.765_197_686_557_966_6).abs() < 1e-15);
    }

    #[test]
    fn continuity_at_switch() {
        let (a, _) = series(SWITCH);
        let (b, _) = hankel(SWITCH);
        assert!((a - b).abs() < 1e-11, "{a} {b}");
    }

    #[test]
    fn branch() {
        assert!((j0_sqrt(1.0).unwrap() - 0.765_197_686_557_966_6).abs() < 1e-15);
        // I0(1) = 1.2660658777520082
        assert!((j0_sqrt(-1.0).unwrap() - 1.266_065_877_752_008_2).abs() < 1e-14);
    }

    #[test]
    fn non_finite() {
        assert!(bessel_j0(f64::NAN).is_err());
    }
}
