use super::my::{integrate_line, my_q, my_survival};
use super::spectral::{drift_density, eta, q2_factorized};
use super::{check_same_len, DensityEstimate, DriftVector};
use crate::error::{check_finite, check_positive, Error, Result};
use crate::quad::{ErrorBounded, QuadratureSpec};
use crate::specfun::{bessel_k_scaled, gamma, theta, Order};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn check_n(x: &[f64], mu: &[f64]) -> Result<()> {
    if mu.len() != x.len() {
        return Err(Error::domain(format!("drift has length {}, configuration {}", mu.len(), x.len())));
    }
    if x.is_empty() || x.len() > 2 {
        return Err(Error::Capability(format!("implemented for N <= 2, got N = {}", x.len())));
    }
    Ok(())
}

/// log K₀(e^{-x}).
fn ln_k0_exp(x: f64) -> Result<f64> {
    Ok(bessel_k_scaled(Order::Real(0.0), (-x).exp())?.ln_abs())
}

/// Survival probability 𝒩^μ_N(T, x), N ≤ 2.
///
/// For N = 2 the centre of mass integrates out exactly and the relative
/// coordinate is the one-dimensional model at time T/2 with drift μ₂ - μ₁.
pub fn survival_n(t: f64, x: &[f64], mu: &[f64], spec: &QuadratureSpec) -> Result<ErrorBounded> {
    check_positive("T", t)?;
    check_same_len(x, x)?;
    check_n(x, mu)?;
    spec.validate()?;
    match x.len() {
        1 => my_survival(t, x[0], mu[0]),
        _ => my_survival(0.5 * t, eta(x), mu[1] - mu[0]),
    }
}

/// Q^μ_N(t, y|x) for N ≤ 2.
fn q_mu(t: f64, y: &[f64], x: &[f64], mu: &[f64]) -> Result<DensityEstimate> {
    match x.len() {
        1 => my_q(t, y[0], x[0], mu[0]),
        _ => drift_density(t, y, x, &DriftVector::new(mu.to_vec())?, q2_factorized),
    }
}

/// P^μ_{N,T}(s, x; t, y) = 𝒩^μ_N(T - t, y) Q^μ_N(t - s, y|x) / 𝒩^μ_N(T - s, x).
#[allow(clippy::too_many_arguments)]
pub fn conditioned_density_t(
    s: f64,
    t: f64,
    horizon: f64,
    y: &[f64],
    x: &[f64],
    mu: &[f64],
    spec: &QuadratureSpec,
) -> Result<DensityEstimate> {
    check_same_len(y, x)?;
    check_n(x, mu)?;
    check_finite("s", s)?;
    if !(0.0 <= s && s < t && t <= horizon && horizon.is_finite()) {
        return Err(Error::domain(format!("need 0 <= s < t <= T, got s = {s}, t = {t}, T = {horizon}")));
    }
    let q = q_mu(t - s, y, x, mu)?;
    let after = if t == horizon { 1.0 } else { survival_n(horizon - t, y, mu, spec)?.value };
    let before = survival_n(horizon - s, x, mu, spec)?.value;
    Ok(q.scale(after / before))
}

/// P_N(t, y|x) = (ψ₀(y)/ψ₀(x)) Q_N(t, y|x), N ≤ 2, where the ground state
/// is K₀(e^{-x}) for N = 1 and 2K₀(2e^{-(x₂-x₁)/2}) for N = 2.
pub fn oconnell_density(t: f64, y: &[f64], x: &[f64]) -> Result<DensityEstimate> {
    check_positive("t", t)?;
    check_same_len(y, x)?;
    match x.len() {
        1 => {
            let r = (ln_k0_exp(y[0])? - ln_k0_exp(x[0])?).exp();
            Ok(my_q(t, y[0], x[0], 0.0)?.scale(r))
        }
        2 => {
            let r = (ln_k0_exp(eta(y))? - ln_k0_exp(eta(x))?).exp();
            Ok(q2_factorized(t, y, x)?.scale(r))
        }
        n => Err(Error::Capability(format!("P_N is implemented for N <= 2, got N = {n}"))),
    }
}

/// Which distribution of the one-dimensional model started from -∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FromMinusInfinity {
    /// Conditioned to survive up to the horizon T.
    FiniteT { horizon: f64 },
    /// Conditioned to survive forever.
    InfiniteT,
}

/// ∫ θ_{e^{-y}}(T) e^{-μy} dy.
fn theta_moment(mu: f64, horizon: f64) -> Result<ErrorBounded> {
    let spec = QuadratureSpec::new(1e-300, 1e-10);
    // mass sits near y ~ -log(T)/2 and decays like e^{-μy} to the right
    let center = -0.5 * horizon.ln();
    integrate_line(
        |y| Ok(theta((-y).exp(), horizon)?.value * (-mu * y).exp()),
        center,
        0.5f64.max(0.25 / mu),
        &spec,
    )
}

/// J^μ(1, T) = 2 ∫ θ_{e^{-y}}(T) e^{-μy} dy, the normalizer of the
/// distribution at time T of the one-dimensional model started from -∞.
pub fn j_mu_1(mu: f64, horizon: f64) -> Result<ErrorBounded> {
    check_positive("mu", mu)?;
    check_positive("T", horizon)?;
    Ok(theta_moment(mu, horizon)?.scale(2.0))
}

/// √(2π) 2^{2-μ} Γ(μ/2)^{-2} T^{3/2} e^{-π²/T}, the large-T form of the
/// normalizer 1/∫θ_{e^{-y}}(T)e^{-μy}dy.
pub fn minus_infinity_constant(mu: f64, horizon: f64) -> Result<f64> {
    check_positive("mu", mu)?;
    check_positive("T", horizon)?;
    let g = gamma(mu / 2.0)?.value;
    Ok((2.0 * PI).sqrt() * 2f64.powf(2.0 - mu) / (g * g) * horizon.powf(1.5) * (-PI * PI / horizon).exp())
}

/// Density at time t of the one-dimensional model started from -∞.
///
/// `FiniteT`: c e^{μ²(T-t)/2} θ_{e^{-y}}(t) e^{-μy} 𝒩^μ(T - t, y), μ > 0,
/// with c = 1/∫θ_{e^{-z}}(T)e^{-μz}dz computed exactly (at t = T this is
/// c θ_{e^{-y}}(T) e^{-μy}). `InfiniteT`: 2e^{-μ²t/2} θ_{e^{-y}}(t) K₀(e^{-y}).
pub fn from_minus_infinity(mode: FromMinusInfinity, t: f64, y: f64, mu: f64) -> Result<ErrorBounded> {
    check_positive("t", t)?;
    check_finite("y", y)?;
    check_finite("mu", mu)?;
    let th = theta((-y).exp(), t)?;
    match mode {
        FromMinusInfinity::FiniteT { horizon } => {
            check_positive("mu", mu)?;
            check_positive("T", horizon)?;
            if t > horizon {
                return Err(Error::domain(format!("t = {t} is after the horizon T = {horizon}")));
            }
            let c = 1.0 / theta_moment(mu, horizon)?.value;
            let surv = if t == horizon { 1.0 } else { my_survival(horizon - t, y, mu)?.value };
            let pre = c * (mu * mu * (horizon - t) / 2.0 - mu * y).exp() * surv;
            Ok(th.scale(pre))
        }
        FromMinusInfinity::InfiniteT => {
            let k = bessel_k_scaled(Order::Real(0.0), (-y).exp())?.value();
            Ok(th.scale(2.0 * (-mu * mu * t / 2.0).exp() * k))
        }
    }
}

/// I^μ_0(N) = ∫ ψ₀(y) e^{-μ·y} dy. For N = 1 (ground state K₀(e^{-y})) this
/// is 2^{μ-2} Γ(μ/2)². For N ≥ 2 ψ₀ is invariant under common
/// translations and the integral diverges.
pub fn i0_mu(mu: &[f64]) -> Result<f64> {
    match mu.len() {
        1 => {
            check_positive("mu", mu[0])?;
            let g = gamma(mu[0] / 2.0)?.value;
            Ok(2f64.powf(mu[0] - 2.0) * g * g)
        }
        0 => Err(Error::domain("empty drift")),
        n => Err(Error::domain(format!(
            "I_0^mu diverges for N = {n}: psi_0 is constant along x + a(1,..,1)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::gauss_kronrod;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::new(1e-14, 1e-10)
    }

    #[test]
    fn survival_two_particles_reduces() {
        let a = survival_n(1.0, &[0.0, 2.0], &[0.0, 0.0], &spec()).unwrap().value;
        assert!(a > 0.0 && a < 1.0);
        let b = survival_n(2.0, &[0.0, 2.0], &[0.0, 0.0], &spec()).unwrap().value;
        assert!(b < a);
        let s = survival_n(1e-3, &[0.0, 5.0], &[0.0, 0.0], &spec()).unwrap().value;
        assert!(s >= 0.999);
    }

    #[test]
    fn conditioned_normalized() {
        let sp = QuadratureSpec::new(1e-12, 1e-7);
        let f = |y: f64| conditioned_density_t(0.0, 0.5, 2.0, &[y], &[0.0], &[0.3], &sp).unwrap().value;
        let total = integrate_line(|y| Ok(f(y)), 0.0, 0.5, &sp).unwrap().value;
        assert!((total - 1.0).abs() < 1e-4, "{total}");
        // at t = T the survival factor after t is 1
        let a = conditioned_density_t(0.0, 1.0, 1.0, &[0.2], &[0.0], &[0.3], &sp).unwrap().value;
        let q = my_q(1.0, 0.2, 0.0, 0.3).unwrap().value / my_survival(1.0, 0.0, 0.3).unwrap().value;
        assert!((a - q).abs() < 1e-12 * q);
    }

    #[test]
    fn oconnell_density_normalized() {
        let sp = QuadratureSpec::new(1e-12, 1e-8);
        let total = integrate_line(|y| Ok(oconnell_density(1.0, &[y], &[0.0])?.value), 0.0, 0.5, &sp)
            .unwrap()
            .value;
        assert!((total - 1.0).abs() < 1e-4, "{total}");
        let x = [0.3, 1.1];
        let r = oconnell_density(0.01, &x, &x).unwrap().value / q2_factorized(0.01, &x, &x).unwrap().value;
        assert!((r - 1.0).abs() < 1e-14);
    }

    #[test]
    fn infinite_horizon_normalized_at_zero_drift() {
        let sp = QuadratureSpec::new(1e-12, 1e-8);
        let total = integrate_line(
            |y| Ok(from_minus_infinity(FromMinusInfinity::InfiniteT, 1.0, y, 0.0)?.value),
            0.0,
            0.5,
            &sp,
        )
        .unwrap()
        .value;
        assert!((total - 1.0).abs() < 1e-3, "{total}");
        for y in [-3.0, -1.0, 0.0, 2.0, 5.0] {
            assert!(from_minus_infinity(FromMinusInfinity::InfiniteT, 1.0, y, 0.0).unwrap().value >= 0.0);
        }
    }

    #[test]
    fn finite_horizon_normalized() {
        let sp = QuadratureSpec::new(1e-12, 1e-7);
        let mode = FromMinusInfinity::FiniteT { horizon: 2.0 };
        let at_t = |t: f64| {
            gauss_kronrod(|y| from_minus_infinity(mode, t, y, 0.8).unwrap().value, -6.0, 25.0, &sp)
                .unwrap()
                .value
        };
        assert!((at_t(2.0) - 1.0).abs() < 1e-6);
        assert!((at_t(1.0) - 1.0).abs() < 1e-4);
        assert!(from_minus_infinity(mode, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn normalizer_approaches_large_t_form() {
        // the closed-form constant is the T -> infinity form; the gap closes like 1/T
        let mu = 0.8;
        let gap = |t: f64| (2.0 / j_mu_1(mu, t).unwrap().value / minus_infinity_constant(mu, t).unwrap() - 1.0).abs();
        let (a, b) = (gap(100.0), gap(400.0));
        assert!(b < 0.05 && b < 0.5 * a, "{a} {b}");
    }

    #[test]
    fn i0_values() {
        assert!((i0_mu(&[1.0]).unwrap() - PI / 2.0).abs() < 1e-14);
        assert!(i0_mu(&[0.0, 1.0]).is_err());
    }
}
