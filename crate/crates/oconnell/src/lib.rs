//! Brownian particles killed by a quantum Toda potential, and the process
//! obtained by conditioning them to survive forever.
//!
//! The crate is split the same way the computation is:
//!
//! - [`quad`]: quadrature rules used everywhere else.
//! - [`specfun`]: Γ, J₀, I_ν, K_ν (real and imaginary order) and θ_r(t).
//! - [`whittaker`]: class-one Whittaker functions ψ_λ, ψ₀ and the drift field.
//! - [`densities`]: transition densities, survival probabilities and their limits.
//! - [`pathsim`]: Feynman–Kac Monte Carlo and SDE integrators.
//! - [`verify`]: the cross-checks run by `oconnell verify` and the acceptance suite.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod densities;
pub mod error;
pub mod pathsim;
pub mod quad;
pub mod specfun;
pub mod verify;
pub mod whittaker;

pub use error::{Error, Result};
