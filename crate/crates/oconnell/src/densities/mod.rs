//! Transition densities and survival probabilities.
//!
//! Free and noncolliding kernels ([`heat_kernel`], [`km_density`],
//! [`noncolliding_density`]), the one-dimensional killed kernel with
//! potential e^{-2x}/2 ([`my_q`]), the N-particle killed kernel `Q_N`
//! ([`q_spectral`], [`q_spectral_mc`]), survival probabilities, the
//! conditioned densities and the distributions started from -∞.
//!
//! "N = 1" for survival and conditioning means the one-dimensional model
//! with potential e^{-2x}/2, whose ground state is K₀(e^{-x}). For
//! [`q_spectral`], N = 1 means a free particle.

mod conditioned;
mod kernels;
mod my;
mod spectral;

pub use conditioned::{
    conditioned_density_t, from_minus_infinity, i0_mu, j_mu_1, minus_infinity_constant, oconnell_density,
    survival_n, FromMinusInfinity,
};
pub use kernels::{heat_kernel, km_density, noncolliding_density, vandermonde, vandermonde_scaled};
pub use my::{kk4_product, mellin_k0, my_q, my_q_spectral, my_survival, my_survival_box, my_survival_spectral};
pub use spectral::{
    chapman_kolmogorov_q2, drift_density, q2_factorized, q2_spectral_double, q_spectral, q_spectral_mc,
    selberg_check, theta_n, theta2_spectral_double, SelbergCheck, T_MIN,
};

use crate::error::{check_finite, check_positive, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

/// A density value with an absolute error bound (quadrature, closed form)
/// or a standard error (Monte Carlo).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub method: DensityMethod,
}

impl DensityEstimate {
    pub fn closed_form(value: f64) -> Self {
        DensityEstimate {
            value,
            error_bound: 4.0 * f64::EPSILON * value.abs(),
            method: DensityMethod::ClosedForm,
        }
    }

    pub fn quadrature(value: f64, error_bound: f64) -> Self {
        DensityEstimate {
            value,
            error_bound,
            method: DensityMethod::Quadrature,
        }
    }

    pub fn monte_carlo(value: f64, std_error: f64) -> Self {
        DensityEstimate {
            value,
            error_bound: std_error,
            method: DensityMethod::MonteCarlo,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        DensityEstimate {
            value: self.value * c,
            error_bound: self.error_bound * c.abs(),
            method: self.method,
        }
    }
}

/// Constant drift μ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftVector(pub Vec<f64>);

impl DriftVector {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        for &m in &mu {
            check_finite("drift", m)?;
        }
        Ok(DriftVector(mu))
    }

    pub fn zero(n: usize) -> Self {
        DriftVector(vec![0.0; n])
    }

    pub fn in_weyl_chamber(&self) -> bool {
        crate::whittaker::in_weyl_chamber(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|m| m * m).sum()
    }
}

impl std::ops::Deref for DriftVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Elapsed time t with an optional horizon T ≥ t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeInterval {
    pub t: f64,
    pub horizon: Option<f64>,
}

impl TimeInterval {
    pub fn new(t: f64, horizon: Option<f64>) -> Result<Self> {
        check_positive("t", t)?;
        if let Some(h) = horizon {
            check_positive("T", h)?;
            if h < t {
                return Err(Error::domain(format!("horizon T = {h} is before t = {t}")));
            }
        }
        Ok(TimeInterval { t, horizon })
    }
}

pub(crate) fn check_same_len(y: &[f64], x: &[f64]) -> Result<()> {
    if y.len() != x.len() || x.is_empty() {
        return Err(Error::domain(format!(
            "configurations must have the same nonzero length, got {} and {}",
            y.len(),
            x.len()
        )));
    }
    for &v in y.iter().chain(x) {
        check_finite("position", v)?;
    }
    Ok(())
}
