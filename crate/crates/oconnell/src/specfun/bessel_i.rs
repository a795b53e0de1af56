use crate::error::{check_finite, Error, Result};
use crate::quad::ErrorBounded;

/// Power series for I_ν(z); any real ν that is not a negative integer.
fn series(nu: f64, z: f64) -> (f64, f64) {
    let q = 0.25 * z * z;
    let lead = nu * (0.5 * z).ln();
    // first term (z/2)^nu / Gamma(nu + 1), with the sign of Gamma kept
    let g = libm::tgamma(nu + 1.0);
    let mut term = if g.is_finite() {
        lead.exp() / g
    } else {
        (lead - libm::lgamma(nu + 1.0)).exp()
    };
    let mut sum = term;
    let mut biggest = term.abs();
    let mut k = 0.0;
    loop {
        term *= q / ((k + 1.0) * (k + 1.0 + nu));
        sum += term;
        biggest = biggest.max(term.abs());
        k += 1.0;
        if term.abs() <= 1e-17 * sum.abs() && k + nu > 0.0 {
            break;
        }
        if k > 1e6 {
            break;
        }
    }
    (sum, (k + 4.0) * f64::EPSILON * biggest)
}

/// I_ν(z) for ν ≥ 0 and z ≥ 0 by the power series, which has only positive
/// terms and so no cancellation.
pub fn bessel_i(nu: f64, z: f64) -> Result<ErrorBounded> {
    check_finite("nu", nu)?;
    check_finite("z", z)?;
    if nu < 0.0 {
        return Err(Error::domain(format!("order must be >= 0, got {nu}")));
    }
    if z < 0.0 {
        return Err(Error::domain(format!("argument must be >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(ErrorBounded::series(if nu == 0.0 { 1.0 } else { 0.0 }, 0.0));
    }
    let (v, e) = series(nu, z);
    if !v.is_finite() {
        return Err(Error::domain(format!("I_{nu}({z}) overflows")));
    }
    Ok(ErrorBounded::series(v, e))
}

/// I_ν(z) for any real order; negative integers use I_{-n} = I_n.
pub fn bessel_i_any(nu: f64, z: f64) -> Result<ErrorBounded> {
    if nu < 0.0 && nu == nu.round() {
        return bessel_i(-nu, z);
    }
    if nu >= 0.0 {
        return bessel_i(nu, z);
    }
    check_finite("z", z)?;
    if z <= 0.0 {
        return Err(Error::domain(format!("argument must be > 0, got {z}")));
    }
    let (v, e) = series(nu, z);
    Ok(ErrorBounded::series(v, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_values() {
        assert_eq!(bessel_i(0.0, 0.0).unwrap().value, 1.0);
        assert!((bessel_i(0.0, 1e-12).unwrap().value - 1.0).abs() < 1e-15);
        let half = (2.0 / std::f64::consts::PI).sqrt() * 1f64.sinh();
        let v = bessel_i(0.5, 1.0).unwrap().value;
        assert!((v - half).abs() < 1e-14 * half, "{v} {half}");
        assert!((v - 0.937_674_888_245_488).abs() < 1e-14);
        // I_1(0.1); the three leading series terms give 0.0500625260...
        let v = bessel_i(1.0, 0.1).unwrap().value;
        assert!((v - 0.050_062_526_047_092_7).abs() < 1e-16, "{v}");
    }

    #[test]
    fn large_argument() {
        // I0(50) = 2.93255378384933e20
        let v = bessel_i(0.0, 50.0).unwrap().value;
        assert!((v / 2.932_553_783_849_336e20 - 1.0).abs() < 1e-13, "{v}");
    }

    #[test]
    fn negative_order() {
        // I_{-1/2}(x) = sqrt(2/(pi x)) cosh x
        let v = bessel_i_any(-0.5, 2.0).unwrap().value;
        let e = (1.0 / std::f64::consts::PI).sqrt() * 2f64.cosh();
        assert!((v - e).abs() < 1e-14 * e);
        assert_eq!(bessel_i_any(-1.0, 0.3).unwrap().value, bessel_i(1.0, 0.3).unwrap().value);
    }

    #[test]
    fn domain() {
        assert!(bessel_i(0.0, -1.0).is_err());
        assert!(bessel_i(-0.5, 1.0).is_err());
    }
}
