//! Class-one Whittaker functions of the quantum Toda lattice.
//!
//! ψ^{(N)}_λ(x) is the integral of exp(F_λ(T)) over triangular arrays T
//! whose bottom row is x. Only purely imaginary λ = iν (stored as the real
//! vector ν) and λ = 0 are supported.

mod mc;
mod recursion;

pub use mc::{psi_mc, PsiEstimate};
pub(crate) use recursion::psi_recursive;
pub use recursion::{psi_direct, Scaled};

use crate::error::{check_finite, Error, Result};
use crate::quad::QuadratureSpec;
use crate::specfun::{bessel_k_scaled, k_log_derivative, Order};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::Deref;

/// Particle positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration(pub Vec<f64>);

impl Configuration {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        for &v in &x {
            check_finite("position", v)?;
        }
        if x.is_empty() {
            return Err(Error::domain("configuration needs at least one particle"));
        }
        Ok(Configuration(x))
    }

    /// x₁ < x₂ < ⋯ < x_N
    pub fn in_weyl_chamber(&self) -> bool {
        in_weyl_chamber(&self.0)
    }
}

impl Deref for Configuration {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn in_weyl_chamber(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] < w[1])
}

/// λ = iν, stored as ν.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralParameter(pub Vec<f64>);

impl SpectralParameter {
    pub fn new(nu: Vec<f64>) -> Result<Self> {
        for &v in &nu {
            check_finite("spectral parameter", v)?;
        }
        Ok(SpectralParameter(nu))
    }

    pub fn zero(n: usize) -> Self {
        SpectralParameter(vec![0.0; n])
    }

    /// γ = -½ Σ λ_j² = ½ Σ ν_j²
    pub fn eigenvalue(&self) -> f64 {
        0.5 * self.0.iter().map(|v| v * v).sum::<f64>()
    }
}

impl Deref for SpectralParameter {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Triangular array T_{k,j}, 1 ≤ j ≤ k ≤ N, with the bottom row fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularArray {
    n: usize,
    // row k (1-based) occupies entries [k(k-1)/2, k(k+1)/2)
    entries: Vec<f64>,
}

impl TriangularArray {
    /// Array anchored at `x`, with the N(N-1)/2 free entries listed row by
    /// row from the top.
    pub fn anchored(x: &[f64], free: &[f64]) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::domain("empty bottom row"));
        }
        if free.len() != n * (n - 1) / 2 {
            return Err(Error::domain(format!(
                "size {n} array needs {} free entries, got {}",
                n * (n - 1) / 2,
                free.len()
            )));
        }
        let mut entries = free.to_vec();
        entries.extend_from_slice(x);
        Ok(TriangularArray { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// T_{k,j} with 1-based indices.
    pub fn get(&self, k: usize, j: usize) -> f64 {
        debug_assert!(1 <= j && j <= k && k <= self.n);
        self.entries[k * (k - 1) / 2 + j - 1]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[k * (k - 1) / 2..k * (k + 1) / 2]
    }

    pub fn bottom(&self) -> &[f64] {
        self.row(self.n)
    }

    /// Overwrites the free entries in place.
    pub fn set_free(&mut self, free: &[f64]) {
        let m = self.n * (self.n - 1) / 2;
        self.entries[..m].copy_from_slice(free);
    }
}

/// F_λ(T) = Σ_k λ_k (Σ_j T_{k,j} - Σ_j T_{k-1,j})
///          - Σ_{k<N} Σ_{j≤k} (e^{-(T_{k,j} - T_{k+1,j})} + e^{-(T_{k+1,j+1} - T_{k,j})}).
pub fn givental_exponent(nu: &[f64], t: &TriangularArray) -> Result<Complex64> {
    let n = t.size();
    if nu.len() != n {
        return Err(Error::domain(format!("need {n} spectral components, got {}", nu.len())));
    }
    let mut phase = 0.0;
    let mut prev = 0.0;
    for k in 1..=n {
        let s: f64 = t.row(k).iter().sum();
        phase += nu[k - 1] * (s - prev);
        prev = s;
    }
    let mut decay = 0.0;
    for k in 1..n {
        for j in 1..=k {
            let tk = t.get(k, j);
            decay += (-(tk - t.get(k + 1, j))).exp() + (-(t.get(k + 1, j + 1) - tk)).exp();
        }
    }
    Ok(Complex64::new(-decay, phase))
}

fn check_args(nu: &[f64], x: &[f64]) -> Result<()> {
    if nu.len() != x.len() {
        return Err(Error::domain(format!(
            "spectral parameter has {} components for {} particles",
            nu.len(),
            x.len()
        )));
    }
    for &v in nu.iter().chain(x) {
        check_finite("argument", v)?;
    }
    Ok(())
}

/// Value with an error estimate, as returned by [`psi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub value: Complex64,
    pub error_bound: f64,
}

/// ψ^{(N)}_{iν}(x) by quadrature, N ≤ 3.
///
/// N = 2 integrates the one free array entry directly; N = 3 integrates
/// the middle row against the closed form of ψ^{(2)}.
pub fn psi(nu: &[f64], x: &[f64], spec: &QuadratureSpec) -> Result<PsiValue> {
    check_args(nu, x)?;
    spec.validate()?;
    match x.len() {
        1 => Ok(PsiValue {
            value: Complex64::from_polar(1.0, nu[0] * x[0]),
            error_bound: 0.0,
        }),
        2 => recursion::psi2_givental(nu, x, spec),
        3 => {
            let (s, err) = recursion::psi_recursive(nu, x, spec.rel_tol)?;
            let v = s.value();
            Ok(PsiValue {
                value: v,
                error_bound: err * v.norm() + spec.abs_tol,
            })
        }
        n => Err(Error::Capability(format!(
            "quadrature for psi supports N <= 3 (got {n}); use psi_mc for N <= 5"
        ))),
    }
}

/// The closed form 2 e^{i(ν₁+ν₂)(x₁+x₂)/2} K_{i(ν₁-ν₂)}(2e^{-(x₂-x₁)/2}).
pub fn psi2_closed_form(nu: &[f64], x: &[f64]) -> Result<Complex64> {
    check_args(nu, x)?;
    if x.len() != 2 {
        return Err(Error::domain("closed form is for N = 2"));
    }
    let z = 2.0 * (-(x[1] - x[0]) / 2.0).exp();
    let k = bessel_k_scaled(Order::Imaginary(nu[0] - nu[1]), z)?;
    let ph = 0.5 * (nu[0] + nu[1]) * (x[0] + x[1]);
    Ok(Complex64::from_polar(2.0 * k.value(), ph))
}

/// log ψ₀^{(N)}(x), N ≤ 4. Stays finite for configurations far outside the
/// Weyl chamber where ψ₀ itself underflows.
pub fn ln_psi0(x: &[f64], rel_tol: f64) -> Result<f64> {
    for &v in x {
        check_finite("position", v)?;
    }
    match x.len() {
        0 => Err(Error::domain("empty configuration")),
        1 => Ok(0.0),
        2..=4 => {
            let nu = vec![0.0; x.len()];
            let (s, _) = recursion::psi_recursive(&nu, x, rel_tol)?;
            Ok(s.ln_abs())
        }
        n => Err(Error::Capability(format!("psi0 supports N <= 4, got {n}"))),
    }
}

/// ψ₀^{(N)}(x) > 0 by row-by-row recursion, N ≤ 4.
pub fn psi0(x: &[f64], spec: &QuadratureSpec) -> Result<crate::quad::ErrorBounded> {
    spec.validate()?;
    for &v in x {
        check_finite("position", v)?;
    }
    match x.len() {
        0 => Err(Error::domain("empty configuration")),
        1 => Ok(crate::quad::ErrorBounded::quadrature(1.0, 0.0)),
        2..=4 => {
            let nu = vec![0.0; x.len()];
            let tol = if x.len() == 4 { spec.rel_tol.max(1e-8) } else { spec.rel_tol };
            let (s, err) = recursion::psi_recursive(&nu, x, tol)?;
            let v = s.value().re;
            Ok(crate::quad::ErrorBounded::quadrature(v, err * v.abs() + 1e-300))
        }
        n => Err(Error::Capability(format!("psi0 supports N <= 4, got {n}"))),
    }
}

/// F^{(N)}(x) = ∇ log ψ₀^{(N)}(x).
///
/// N = 2 uses F₁ = (K₀′/K₀)(z) z/2 with z = 2e^{-(x₂-x₁)/2}, F₂ = -F₁.
/// N = 3, 4 use central differences of log ψ₀.
pub fn drift_field(x: &[f64]) -> Result<Vec<f64>> {
    for &v in x {
        check_finite("position", v)?;
    }
    match x.len() {
        0 => Err(Error::domain("empty configuration")),
        1 => Ok(vec![0.0]),
        2 => {
            let f1 = drift2(x[1] - x[0])?;
            Ok(vec![f1, -f1])
        }
        3 | 4 => {
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let h = 1e-4 * scale;
            let tol = if x.len() == 3 { 1e-13 } else { 1e-10 };
            let mut out = Vec::with_capacity(x.len());
            let mut y = x.to_vec();
            for j in 0..x.len() {
                y[j] = x[j] + h;
                let up = ln_psi0(&y, tol)?;
                y[j] = x[j] - h;
                let dn = ln_psi0(&y, tol)?;
                y[j] = x[j];
                out.push((up - dn) / (2.0 * h));
            }
            Ok(out)
        }
        n => Err(Error::Capability(format!("drift field supports N <= 4, got {n}"))),
    }
}

/// First component of the N = 2 drift as a function of the gap x₂ - x₁.
pub fn drift2(gap: f64) -> Result<f64> {
    let z = 2.0 * (-0.5 * gap).exp();
    Ok(k_log_derivative(0.0, z)? * 0.5 * z)
}

/// |ℋ_N ψ_λ(x) - γ ψ_λ(x)| with second derivatives by central differences.
pub fn eigen_residual(nu: &[f64], x: &[f64]) -> Result<f64> {
    check_args(nu, x)?;
    let n = x.len();
    if n > 3 {
        return Err(Error::Capability(format!("eigen_residual supports N <= 3, got {n}")));
    }
    let spec = QuadratureSpec::new(1e-15, 1e-14);
    let eval = |y: &[f64]| psi(nu, y, &spec).map(|p| p.value);
    let h = 1e-3;
    let c = eval(x)?;
    let mut lap = Complex64::new(0.0, 0.0);
    let mut y = x.to_vec();
    for j in 0..n {
        y[j] = x[j] + h;
        let up = eval(&y)?;
        y[j] = x[j] - h;
        let dn = eval(&y)?;
        y[j] = x[j];
        lap += (up - 2.0 * c + dn) / (h * h);
    }
    let potential: f64 = x.windows(2).map(|w| (-(w[1] - w[0])).exp()).sum();
    let gamma = SpectralParameter(nu.to_vec()).eigenvalue();
    Ok((-0.5 * lap + potential * c - gamma * c).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::bessel_k;

    fn k0(x: f64) -> f64 {
        bessel_k(Order::Real(0.0), x).unwrap().value
    }

    #[test]
    fn exponent_examples() {
        let t = TriangularArray::anchored(&[0.7], &[]).unwrap();
        let f = givental_exponent(&[2.0], &t).unwrap();
        assert_eq!(f, Complex64::new(0.0, 1.4));
        let t = TriangularArray::anchored(&[0.2, 1.5], &[0.4]).unwrap();
        let f = givental_exponent(&[0.0, 0.0], &t).unwrap();
        let want = -((-(0.4 - 0.2f64)).exp() + (-(1.5 - 0.4f64)).exp());
        assert!((f.re - want).abs() < 1e-15 && f.im == 0.0);
        let t = TriangularArray::anchored(&[0.0, 0.0], &[0.0]).unwrap();
        let f = givental_exponent(&[1.3, -1.3], &t).unwrap();
        assert_eq!(f, Complex64::new(-2.0, 0.0));
    }

    #[test]
    fn array_layout() {
        let t = TriangularArray::anchored(&[1.0, 2.0, 3.0], &[0.5, 0.6, 0.7]).unwrap();
        assert_eq!(t.get(1, 1), 0.5);
        assert_eq!(t.row(2), &[0.6, 0.7]);
        assert_eq!(t.bottom(), &[1.0, 2.0, 3.0]);
        assert!(TriangularArray::anchored(&[1.0, 2.0], &[]).is_err());
    }

    #[test]
    fn psi_small_n() {
        let s = QuadratureSpec::default();
        let p = psi(&[0.8], &[1.5], &s).unwrap().value;
        assert!((p - Complex64::from_polar(1.0, 1.2)).norm() < 1e-15);
        let p = psi(&[0.0, 0.0], &[0.0, 0.0], &s).unwrap().value;
        assert!((p.re - 0.227_787_745_499_067).abs() < 1e-13, "{p}");
        let p = psi(&[1.0, -1.0], &[0.0, 1.0], &s).unwrap().value;
        assert!((p.re - 0.158_509_566_350_694).abs() < 1e-12 && p.im.abs() < 1e-14, "{p}");
    }

    #[test]
    fn psi0_values() {
        let s = QuadratureSpec::default();
        assert_eq!(psi0(&[3.0], &s).unwrap().value, 1.0);
        let v = psi0(&[0.0, 2.0], &s).unwrap().value;
        assert!((v - 2.0 * k0(2.0 * (-1f64).exp())).abs() < 1e-13);
        assert!((v - 1.248_596_646_654_992).abs() < 1e-12);
    }

    #[test]
    fn n2_drift() {
        let f = drift_field(&[0.0, 2.0]).unwrap();
        assert!((f[0] + f[1]).abs() < 1e-15);
        let z = 2.0 * (-1f64).exp();
        let kd = crate::specfun::bessel_k_deriv(Order::Real(0.0), z).unwrap().value;
        let want = -(kd / k0(z)) * (-1f64).exp();
        assert!(f[1] > 0.0);
        assert!((f[1] - want).abs() < 1e-13);
        assert_eq!(drift_field(&[4.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn residual_small() {
        assert!(eigen_residual(&[0.0, 0.0], &[0.0, 1.0]).unwrap() < 1e-4);
        assert!(eigen_residual(&[1.0, -1.0], &[0.0, 1.0]).unwrap() < 1e-4);
        assert!(eigen_residual(&[0.6], &[0.3]).unwrap() < 1e-5);
    }

    #[test]
    fn capability_errors() {
        let s = QuadratureSpec::default();
        assert!(matches!(psi(&[0.0; 4], &[0.0, 1.0, 2.0, 3.0], &s), Err(Error::Capability(_))));
        assert!(matches!(psi0(&[0.0; 5], &s), Err(Error::Capability(_))));
        assert!(psi(&[0.0], &[0.0, 1.0], &s).is_err());
    }
}
