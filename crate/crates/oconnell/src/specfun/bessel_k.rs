use super::bessel_i::bessel_i_any;
use crate::error::{check_finite, check_positive, Error, Result};
use crate::quad::{trapezoid_even, ErrorBounded, QuadratureSpec};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Order of a Macdonald function: K_ν (real) or K_{iν} (imaginary).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Order {
    Real(f64),
    Imaginary(f64),
}

impl Order {
    pub fn value(&self) -> f64 {
        match *self {
            Order::Real(v) | Order::Imaginary(v) => v,
        }
    }
}

/// `mantissa * exp(exponent)`, with `error` bounding the mantissa error.
///
/// K_{iν}(x) falls off like e^{-πν/2}; keeping the exponent separate lets
/// callers multiply by sinh(πν) without overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScaled {
    pub mantissa: f64,
    pub exponent: f64,
    pub error: f64,
}

impl LogScaled {
    pub fn value(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa * self.exponent.exp()
        }
    }

    /// log |value|
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.exponent
    }

    pub fn abs_error(&self) -> f64 {
        self.error * self.exponent.exp()
    }
}

/// Contour height b and starting step for the shifted integral.
fn plan(order: Order, x: f64) -> (f64, f64) {
    match order {
        Order::Real(_) => (0.0, 0.5f64.min(1.0 / x.sqrt())),
        Order::Imaginary(nu) => {
            let nu = nu.abs();
            // saddle of exp(-x cosh t + i nu t) sits at t = i asin(nu/x); for
            // nu > x stay 2/nu below the line Im t = pi/2 where decay is lost
            let saddle = (nu / x).min(1.0).asin();
            let cap = (FRAC_PI_2 - 2.0 / nu.max(1e-300)).max(0.0);
            let b = saddle.min(cap);
            let cb = b.cos();
            let mut h = 0.5f64.min(1.0 / (x * cb).sqrt());
            if b > 0.0 {
                h = h.min(0.5 * (FRAC_PI_2 - b));
            }
            h = h.min(1.0 / (1.0 + nu));
            (b, h)
        }
    }
}

fn mantissa_spec() -> QuadratureSpec {
    QuadratureSpec {
        abs_tol: 1e-16,
        rel_tol: 2e-15,
        max_refinements: 14,
        ..Default::default()
    }
}

// Writing t = a + ib, K_{iν}(x) = e^{-νb - x cos b} ∫_0^∞ env(a) cos φ(a) da with
// env = exp(-x cos b (cosh a - 1)) and φ = νa - x sin b sinh a.
fn eval(order: Order, x: f64, deriv: bool) -> Result<LogScaled> {
    check_positive("x", x)?;
    check_finite("order", order.value())?;
    let spec = mantissa_spec();
    let (b, h0) = plan(order, x);
    match order {
        Order::Real(nu) if deriv => {
            // K'_ν = -(K_{ν-1} + K_{ν+1})/2, both terms positive
            let lo = eval(Order::Real(nu - 1.0), x, false)?;
            let hi = eval(Order::Real(nu + 1.0), x, false)?;
            let e = lo.exponent.max(hi.exponent);
            let (wl, wh) = ((lo.exponent - e).exp(), (hi.exponent - e).exp());
            Ok(LogScaled {
                mantissa: -0.5 * (lo.mantissa * wl + hi.mantissa * wh),
                exponent: e,
                error: 0.5 * (lo.error * wl + hi.error * wh),
            })
        }
        Order::Real(nu) => {
            let nu = nu.abs();
            // pull out the peak of e^{-x(cosh a - 1) + nu a}
            let a_star = (nu / x).asinh();
            let peak = if nu > 0.0 {
                (-2.0 * x * (0.5 * a_star).sinh().powi(2) + nu * a_star).max(0.0)
            } else {
                0.0
            };
            let f = |a: f64| {
                let e = -2.0 * x * (0.5 * a).sinh().powi(2);
                let c = 0.5 * ((e + nu * a - peak).exp() + (e - nu * a - peak).exp());
                if deriv {
                    -c * a.cosh()
                } else {
                    c
                }
            };
            let h = h0.min(if nu > 0.0 { 0.5 / nu.sqrt().max(1.0) } else { h0 });
            let r = trapezoid_even(f, h, &spec)?;
            Ok(LogScaled {
                mantissa: r.value,
                exponent: peak - x,
                error: r.error_bound,
            })
        }
        Order::Imaginary(nu) => {
            let nu = nu.abs();
            let (sb, cb) = b.sin_cos();
            let xc = x * cb;
            let xs = x * sb;
            let f = |a: f64| {
                let env = (-2.0 * xc * (0.5 * a).sinh().powi(2)).exp();
                if env == 0.0 {
                    return 0.0;
                }
                let phi = nu * a - xs * a.sinh();
                if deriv {
                    -env * (a.cosh() * cb * phi.cos() - a.sinh() * sb * phi.sin())
                } else {
                    env * phi.cos()
                }
            };
            let r = trapezoid_even(f, h0, &spec)?;
            Ok(LogScaled {
                mantissa: r.value,
                exponent: -nu * b - xc,
                error: r.error_bound,
            })
        }
    }
}

/// K_ν(x) or K_{iν}(x) as mantissa and exponent.
pub fn bessel_k_scaled(order: Order, x: f64) -> Result<LogScaled> {
    eval(order, x, false)
}

fn to_bounded(s: LogScaled) -> Result<ErrorBounded> {
    let v = s.value();
    if !v.is_finite() {
        return Err(Error::domain(format!(
            "value overflows (log magnitude {})",
            s.ln_abs()
        )));
    }
    Ok(ErrorBounded::quadrature(v, s.abs_error() + 2.0 * f64::EPSILON * v.abs()))
}

/// K_ν(x) for real ν, or K_{iν}(x) for imaginary order, by quadrature of
/// ∫₀^∞ e^{-x cosh t} cosh(νt) dt (cos(νt) for imaginary order).
pub fn bessel_k(order: Order, x: f64) -> Result<ErrorBounded> {
    to_bounded(bessel_k_scaled(order, x)?)
}

/// dK/dx.
pub fn bessel_k_deriv(order: Order, x: f64) -> Result<ErrorBounded> {
    to_bounded(eval(order, x, true)?)
}

/// K′_ν(x)/K_ν(x) for real order. Never underflows, unlike the ratio of
/// the two unscaled values.
pub fn k_log_derivative(nu: f64, x: f64) -> Result<f64> {
    let k = eval(Order::Real(nu), x, false)?;
    let d = eval(Order::Real(nu), x, true)?;
    Ok(d.mantissa / k.mantissa * (d.exponent - k.exponent).exp())
}

/// K_ν(x) = (π/2)(I_{-ν}(x) - I_ν(x))/sin(νπ) for non-integer ν.
pub fn bessel_k_connection(nu: f64, x: f64) -> Result<ErrorBounded> {
    check_positive("x", x)?;
    if nu == nu.round() {
        return Err(Error::domain("connection formula needs a non-integer order"));
    }
    let a = bessel_i_any(-nu, x)?;
    let b = bessel_i_any(nu, x)?;
    let s = (nu * PI).sin();
    let v = 0.5 * PI * (a.value - b.value) / s;
    Ok(ErrorBounded::series(v, 0.5 * PI * (a.error_bound + b.error_bound) / s.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(order: Order, x: f64) -> f64 {
        bessel_k(order, x).unwrap().value
    }

    #[test]
    fn frozen_real_order() {
        assert!((k(Order::Real(0.0), 1.0) - 0.421_024_438_240_708_3).abs() < 1e-15);
        assert!((k(Order::Real(1.0), 1.0) - 0.601_907_230_197_234_6).abs() < 1e-15);
        let half = (0.5 * PI).sqrt() * (-1f64).exp();
        assert!((k(Order::Real(0.5), 1.0) - half).abs() < 1e-15);
        assert!((2.0 * k(Order::Real(0.0), 2.0) - 0.227_787_745_499_067).abs() < 1e-14);
        // K0(1e-8) ~ -ln(5e-9) - gamma
        assert!((k(Order::Real(0.0), 1e-8) - 18.536_612_259_610_778).abs() < 1e-10);
        // K0(500) = 1.0e-219-ish, checked against the large-x expansion
        let big = k(Order::Real(0.0), 500.0);
        let asym = (PI / 1000.0).sqrt() * (-500f64).exp() * (1.0 - 1.0 / 4000.0 + 9.0 / (2.0 * 16_000_000.0));
        assert!((big / asym - 1.0).abs() < 1e-9, "{big} {asym}");
    }

    #[test]
    fn frozen_imaginary_order() {
        let v = 2.0 * k(Order::Imaginary(2.0), 2.0 * (-0.5f64).exp());
        assert!((v - 0.158_509_566_350_694).abs() < 1e-13, "{v}");
        for x in [0.5, 1.0, 2.0] {
            assert!((k(Order::Imaginary(0.0), x) - k(Order::Real(0.0), x)).abs() < 1e-15);
        }
    }

    #[test]
    fn large_imaginary_order_keeps_relative_accuracy() {
        // mpmath: besselk(30j, 1) = -9.18612761825168e-22 (real)
        let s = bessel_k_scaled(Order::Imaginary(30.0), 1.0).unwrap();
        let v = s.value();
        assert!((v / -9.186_127_618_251_677e-22 - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn derivative_identities() {
        let d = bessel_k_deriv(Order::Real(0.0), 1.0).unwrap().value;
        assert!((d + 0.601_907_230_197_234_6).abs() < 1e-14);
        for x in [0.1, 1.0, 10.0] {
            assert!(bessel_k_deriv(Order::Real(0.0), x).unwrap().value < 0.0);
        }
        let h = 1e-5;
        let fd = (k(Order::Real(0.5), 2.0 + h) - k(Order::Real(0.5), 2.0 - h)) / (2.0 * h);
        let d = bessel_k_deriv(Order::Real(0.5), 2.0).unwrap().value;
        assert!((fd - d).abs() < 1e-9);
        let fd = (k(Order::Imaginary(3.0), 0.7 + h) - k(Order::Imaginary(3.0), 0.7 - h)) / (2.0 * h);
        let d = bessel_k_deriv(Order::Imaginary(3.0), 0.7).unwrap().value;
        assert!((fd - d).abs() < 1e-9, "{fd} {d}");
    }

    #[test]
    fn log_derivative_without_underflow() {
        // K0'/K0 -> -1 - 1/(2x) for large x
        let l = k_log_derivative(0.0, 2000.0).unwrap();
        assert!((l + 1.0 + 1.0 / 4000.0).abs() < 1e-7, "{l}");
    }

    #[test]
    fn connection_formula() {
        for x in [0.3, 1.0, 4.0] {
            let a = bessel_k_connection(0.3, x).unwrap().value;
            let b = k(Order::Real(0.3), x);
            assert!((a - b).abs() < 1e-12, "{x}: {a} {b}");
        }
        assert!(bessel_k_connection(1.0, 1.0).is_err());
    }

    #[test]
    fn domain() {
        assert!(bessel_k(Order::Real(0.0), 0.0).is_err());
        assert!(bessel_k(Order::Real(0.0), -1.0).is_err());
        assert!(bessel_k(Order::Imaginary(f64::NAN), 1.0).is_err());
    }
}
