use super::bessel_k::{bessel_k_scaled, Order};
use crate::error::{check_positive, Result};
use crate::quad::{gauss_kronrod, trapezoid_even, ErrorBounded, QuadratureSpec};
use std::f64::consts::PI;

/// Log of the envelope e^{-η²/2t - r(cosh η - 1)} sinh η.
fn log_envelope(eta: f64, r: f64, t: f64) -> f64 {
    -eta * eta / (2.0 * t) - 2.0 * r * (0.5 * eta).sinh().powi(2) + eta.sinh().ln()
}

/// Hartman–Watson type density θ_r(t) from the real η-integral
///
/// θ_r(t) = r e^{π²/2t} / √(2π³t) ∫₀^∞ e^{-η²/2t - r cosh η} sinh η sin(πη/t) dη.
///
/// The integral is summed over whole half-periods of sin(πη/t) so that the
/// alternating contributions cancel panel by panel.
pub fn theta(r: f64, t: f64) -> Result<ErrorBounded> {
    check_positive("r", r)?;
    check_positive("t", t)?;
    // locate the envelope peak and the point where it drops by 1e-18
    let step = (0.02f64).min(0.25 * t.sqrt());
    let mut eta = step;
    let mut peak = f64::NEG_INFINITY;
    let eta_max = loop {
        let l = log_envelope(eta, r, t);
        if l > peak {
            peak = l;
        } else if l < peak - 41.5 || eta > 1e4 {
            break eta;
        }
        eta += step;
    };
    let f = |e: f64| {
        if e == 0.0 {
            0.0
        } else {
            (log_envelope(e, r, t) - peak).exp() * (PI * e / t).sin()
        }
    };
    let width = t.min(eta_max);
    let spec = QuadratureSpec {
        abs_tol: 1e-17 * width,
        rel_tol: 1e-13,
        ..Default::default()
    };
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut abs = 0.0;
    let mut lo = 0.0;
    while lo < eta_max {
        let hi = (lo + t).min(eta_max);
        let p = gauss_kronrod(f, lo, hi, &spec)?;
        sum += p.value;
        err += p.error_bound;
        abs += p.value.abs();
        lo = hi;
    }
    let log_pref = r.ln() + PI * PI / (2.0 * t) - 0.5 * (2.0 * PI.powi(3) * t).ln() - r;
    let c = (log_pref + peak).exp();
    let v = c * sum;
    Ok(ErrorBounded::quadrature(v, c * (err + 8.0 * f64::EPSILON * abs)))
}

/// θ_r(t) from the spectral form (1/π²) ∫₀^∞ e^{-ν²t/2} K_{iν}(r) ν sinh(πν) dν.
pub fn theta_contour(r: f64, t: f64) -> Result<ErrorBounded> {
    check_positive("r", r)?;
    check_positive("t", t)?;
    let mut failure = None;
    let f = |nu: f64| {
        if nu == 0.0 {
            return 0.0;
        }
        match bessel_k_scaled(Order::Imaginary(nu), r) {
            Ok(k) => {
                let ln_sinh = PI * nu + (0.5 * (1.0 - (-2.0 * PI * nu).exp())).ln();
                let l = -nu * nu * t / 2.0 + k.exponent + nu.ln() + ln_sinh;
                k.mantissa * l.exp()
            }
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let h0 = 0.5f64.min(0.5 / t.sqrt()).min(1.0 / (1.0 + r.ln().abs()));
    let spec = QuadratureSpec {
        abs_tol: 1e-300,
        rel_tol: 1e-12,
        ..Default::default()
    };
    let res = trapezoid_even(f, h0, &spec)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(res.scale(1.0 / (PI * PI)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_values() {
        let cases = [
            (1.0, 1.0, 0.739_076_531_303_232),
            (5.0, 0.5, 2.906_712_644),
            (1.0, 0.5, 0.471_739_943_9),
            (1.0, 2.0, 0.205_050_253_6),
        ];
        for (r, t, want) in cases {
            let v = theta(r, t).unwrap();
            assert!((v.value - want).abs() < 1e-9 * want.max(1.0), "theta({r},{t}) = {} want {want}", v.value);
        }
        let v = theta(0.1, 0.5).unwrap().value;
        assert!((v - 1.1281e-8).abs() < 1e-11, "{v}");
    }

    #[test]
    fn two_representations_agree() {
        for (r, t) in [(1.0, 1.0), (0.5, 2.0), (2.0, 5.0)] {
            let a = theta(r, t).unwrap().value;
            let b = theta_contour(r, t).unwrap().value;
            assert!((a - b).abs() < 1e-10, "({r},{t}) {a} {b}");
        }
    }

    #[test]
    fn positive_on_grid() {
        for r in [0.1, 1.0, 5.0] {
            for t in [0.5, 2.0, 10.0] {
                assert!(theta(r, t).unwrap().value > 0.0, "r={r} t={t}");
            }
        }
    }
}
