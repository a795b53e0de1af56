//! Numerical integration.
//!
//! Most integrands in this crate are analytic in a strip around the real
//! axis and decay like `exp(-c cosh t)`. For those the plain trapezoid rule
//! converges exponentially and halving the step is a reliable error
//! estimate, so [`trapezoid_line`] and [`trapezoid_even`] do most of the
//! work. Finite intervals with oscillation or kinks go through the adaptive
//! Gauss–Kronrod rule.

mod accel;
mod gauss;
mod kronrod;
mod trapezoid;

pub use accel::WynnEpsilon;
pub use gauss::{gauss_hermite, gauss_legendre, GaussRule};
pub use kronrod::{gauss_kronrod, gk15};
pub use trapezoid::{exp_sinh, tanh_sinh, trapezoid_even, trapezoid_line};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// How the infinite range of an integral is cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    /// Walk outwards until the integrand is negligible.
    Auto,
    /// Integrate over `[lo, hi]` only.
    Explicit(f64, f64),
}

/// Tolerances for a quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_refinements: u32,
    pub truncation: Truncation,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            max_refinements: 12,
            truncation: Truncation::Auto,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        QuadratureSpec {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::Config(format!("abs_tol must be > 0, got {}", self.abs_tol)));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::Config(format!("rel_tol must be > 0, got {}", self.rel_tol)));
        }
        if self.max_refinements < 1 {
            return Err(Error::Config("max_refinements must be >= 1".into()));
        }
        if let Truncation::Explicit(lo, hi) = self.truncation {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("bad truncation bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// True when `err` is within tolerance for a result of size `value`.
    pub fn accepts(&self, err: f64, value: f64) -> bool {
        err <= self.abs_tol.max(self.rel_tol * value.abs())
    }

    pub fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    Quadrature,
    Recurrence,
}

/// A value together with a bound on its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBounded {
    pub value: f64,
    pub error_bound: f64,
    pub method: Method,
}

impl ErrorBounded {
    pub fn new(value: f64, error_bound: f64, method: Method) -> Self {
        ErrorBounded {
            value,
            error_bound,
            method,
        }
    }

    pub fn series(value: f64, error_bound: f64) -> Self {
        Self::new(value, error_bound, Method::Series)
    }

    pub fn quadrature(value: f64, error_bound: f64) -> Self {
        Self::new(value, error_bound, Method::Quadrature)
    }

    pub fn scale(self, c: f64) -> Self {
        ErrorBounded {
            value: self.value * c,
            error_bound: self.error_bound * c.abs(),
            method: self.method,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::default().validate().is_ok());
        assert!(QuadratureSpec::new(0.0, 1e-3).validate().is_err());
        let s = QuadratureSpec {
            max_refinements: 0,
            ..Default::default()
        };
        assert!(s.validate().is_err());
        let s = QuadratureSpec {
            truncation: Truncation::Explicit(1.0, -1.0),
            ..Default::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn tolerance_mixes_abs_and_rel() {
        let s = QuadratureSpec::new(1e-10, 1e-6);
        assert!(s.accepts(1e-7, 1.0));
        assert!(!s.accepts(1e-7, 1e-3));
        assert!(s.accepts(1e-11, 0.0));
    }
}
