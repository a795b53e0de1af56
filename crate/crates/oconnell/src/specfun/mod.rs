//! Scalar special functions.
//!
//! All functions are pure and thread-safe. Results come with an absolute
//! error bound ([`ErrorBounded`]).

mod bessel_i;
mod bessel_j;
mod bessel_k;
mod gamma;
mod theta;

pub use bessel_i::{bessel_i, bessel_i_any};
pub use bessel_j::{bessel_j0, j0_sqrt};
pub use bessel_k::{
    bessel_k, bessel_k_connection, bessel_k_deriv, bessel_k_scaled, k_log_derivative, LogScaled,
    Order,
};
pub use gamma::{gamma, ln_abs_gamma_complex, ln_gamma};
pub use theta::{theta, theta_contour};

pub use crate::quad::ErrorBounded;

/// Euler's constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
