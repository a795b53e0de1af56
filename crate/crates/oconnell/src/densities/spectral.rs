use super::kernels::heat_kernel;
use super::my::{integrate_line, my_q, Failure};
use super::{check_same_len, DensityEstimate, DriftVector};
use crate::error::{check_positive, Error, Result};
use crate::quad::{gauss_hermite, gauss_kronrod, ErrorBounded, QuadratureSpec};
use crate::specfun::{bessel_k_scaled, theta, Order};
use crate::whittaker::psi_recursive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};

/// Smallest t accepted by the spectral routes.
pub const T_MIN: f64 = 1e-3;

const MC_CHUNK: usize = 1024;

fn check_t(t: f64) -> Result<()> {
    check_positive("t", t)?;
    if t < T_MIN {
        return Err(Error::convergence(
            format!("spectral integral at t = {t:e} below t_min = {T_MIN:e}"),
            f64::NAN,
            f64::INFINITY,
        ));
    }
    Ok(())
}

fn check_two(y: &[f64], x: &[f64]) -> Result<()> {
    check_same_len(y, x)?;
    if x.len() != 2 {
        return Err(Error::domain(format!("expected two particles, got {}", x.len())));
    }
    Ok(())
}

/// Relative coordinate η = (x₂ - x₁)/2 - log 2, in which the pair is a
/// one-dimensional particle killed at rate e^{-2η}/2 running at half speed.
pub(crate) fn eta(x: &[f64]) -> f64 {
    0.5 * (x[1] - x[0]) - LN_2
}

/// Q₂(t, y|x) = p(2t, y₁+y₂|x₁+x₂) Q⁰(t/2, η(y)|η(x)).
pub fn q2_factorized(t: f64, y: &[f64], x: &[f64]) -> Result<DensityEstimate> {
    check_positive("t", t)?;
    check_two(y, x)?;
    let p = heat_kernel(2.0 * t, y[0] + y[1], x[0] + x[1])?;
    Ok(my_q(0.5 * t, eta(y), eta(x), 0.0)?.scale(p))
}

/// ∫∫ e^{-(ν₁²+ν₂²)t/2} cos((ν₁+ν₂)Δ/2) G(ν₁-ν₂) dν₁dν₂ on a square lattice,
/// where `ln_g(w)` returns G(w)e^{w²t/4} as (mantissa, log scale). G must be
/// even. Both factors depend on one lattice index combination only, so
/// they are cached.
fn lattice_double<G: Fn(f64) -> Result<(f64, f64)> + Sync>(t: f64, delta: f64, ln_g: G, rel_tol: f64) -> Result<ErrorBounded> {
    let nu_max = (80.0 / t).sqrt();
    let mut h = (0.5 / t.sqrt()).min(1.0 / (1.0 + 0.5 * delta.abs()));
    let mut g_cache: HashMap<u64, f64> = HashMap::new();
    let mut prev: Option<f64> = None;
    for _ in 0..10 {
        let n = (nu_max / h).ceil() as i64;
        // G on w = k h, k = 0..2n
        let missing: Vec<u64> = (0..=2 * n)
            .map(|k| (k as f64 * h).to_bits())
            .filter(|b| !g_cache.contains_key(b))
            .collect();
        let fresh: Vec<(u64, f64)> = missing
            .par_iter()
            .map(|&b| {
                let w = f64::from_bits(b);
                let (m, l) = ln_g(w)?;
                Ok((b, if m == 0.0 { 0.0 } else { m * (l - w * w * t / 4.0).exp() }))
            })
            .collect::<Result<_>>()?;
        g_cache.extend(fresh);
        let g: Vec<f64> = (0..=2 * n).map(|k| g_cache[&(k as f64 * h).to_bits()]).collect();
        let c: Vec<f64> = (-2 * n..=2 * n)
            .map(|k| {
                let s = k as f64 * h;
                (-s * s * t / 4.0).exp() * (0.5 * s * delta).cos()
            })
            .collect();
        let mut sum = 0.0;
        for i in -n..=n {
            for j in -n..=n {
                sum += g[(i - j).unsigned_abs() as usize] * c[(i + j + 2 * n) as usize];
            }
        }
        let est = sum * h * h;
        if let Some(p) = prev {
            let diff = (est - p).abs();
            if diff <= rel_tol * est.abs() {
                return Ok(ErrorBounded::quadrature(est, diff));
            }
        }
        prev = Some(est);
        h *= 0.5;
    }
    Err(Error::convergence("two-dimensional spectral lattice", prev.unwrap_or(f64::NAN), f64::INFINITY))
}

/// log of w sinh(πw), split as (sign-carrying mantissa, exponent).
fn w_sinh(w: f64) -> (f64, f64) {
    if w == 0.0 {
        return (0.0, 0.0);
    }
    let a = w.abs();
    (1.0, a.ln() + PI * a + (0.5 * (-(-2.0 * PI * a).exp_m1())).ln())
}

/// Q₂(t, y|x) from the two-dimensional spectral integral
///
/// (1/2π³) ∫∫ e^{-|ν|²t/2} cos((ν₁+ν₂)(S_x - S_y)/2) K_{iw}(a)K_{iw}(b) w sinh(πw) dν,
///
/// w = ν₁ - ν₂, a = 2e^{-(x₂-x₁)/2}, b = 2e^{-(y₂-y₁)/2}, S = sum of coordinates.
pub fn q2_spectral_double(t: f64, y: &[f64], x: &[f64], spec: &QuadratureSpec) -> Result<DensityEstimate> {
    check_t(t)?;
    check_two(y, x)?;
    spec.validate()?;
    let a = 2.0 * (-0.5 * (x[1] - x[0])).exp();
    let b = 2.0 * (-0.5 * (y[1] - y[0])).exp();
    let delta = (x[0] + x[1]) - (y[0] + y[1]);
    let g = |w: f64| {
        if w == 0.0 {
            return Ok((0.0, 0.0));
        }
        let ka = bessel_k_scaled(Order::Imaginary(w), a)?;
        let kb = bessel_k_scaled(Order::Imaginary(w), b)?;
        let (m, l) = w_sinh(w);
        Ok((m * ka.mantissa * kb.mantissa, l + ka.exponent + kb.exponent))
    };
    let r = lattice_double(t, delta, g, spec.rel_tol.max(1e-12))?;
    let c = 1.0 / (2.0 * PI.powi(3));
    Ok(DensityEstimate::quadrature(c * r.value, c * r.error_bound))
}

/// Killed transition density Q_N(t, y|x) for N ≤ 2.
///
/// N = 1 is a free particle. N = 2 uses the factorized form; the double
/// spectral integral is [`q2_spectral_double`].
pub fn q_spectral(t: f64, y: &[f64], x: &[f64], spec: &QuadratureSpec) -> Result<DensityEstimate> {
    check_same_len(y, x)?;
    spec.validate()?;
    match x.len() {
        1 => Ok(DensityEstimate::closed_form(heat_kernel(t, y[0], x[0])?)),
        2 => {
            check_t(t)?;
            q2_factorized(t, y, x)
        }
        n => Err(Error::Capability(format!(
            "spectral quadrature supports N <= 2, got N = {n}; use q_spectral_mc for N = 3"
        ))),
    }
}

/// Monte Carlo estimate of Q₃(t, y|x) over the Sklyanin measure.
///
/// ν is drawn from the Gaussian e^{-|ν|²t/2}; the weight is the pair
/// product times Re ψ_{iν}(x) conj ψ_{iν}(y).
pub fn q_spectral_mc(t: f64, y: &[f64], x: &[f64], paths: usize, seed: u64) -> Result<DensityEstimate> {
    check_same_len(y, x)?;
    if x.len() != 3 {
        return Err(Error::Capability(format!("Monte Carlo Q_N is implemented for N = 3, got {}", x.len())));
    }
    if t < 1.0 {
        return Err(Error::domain(format!("q_spectral_mc needs t >= 1 for variance control, got {t}")));
    }
    if paths < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    let normal = Normal::new(0.0, 1.0 / t.sqrt()).expect("positive sd");
    let ln_c = 1.5 * (2.0 * PI / t).ln() - 3.0 * (2.0 * PI).ln() - 6f64.ln();
    let chunks = paths.div_ceil(MC_CHUNK);
    let weights: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = MC_CHUNK.min(paths - c * MC_CHUNK);
            (0..len)
                .map(|_| {
                    let nu: Vec<f64> = (0..3).map(|_| normal.sample(&mut rng)).collect();
                    let mut ln_pairs = 0.0;
                    for k in 0..3 {
                        for j in 0..k {
                            let (m, l) = w_sinh(nu[k] - nu[j]);
                            if m == 0.0 {
                                return Ok(0.0);
                            }
                            ln_pairs += l - PI.ln();
                        }
                    }
                    let (px, _) = psi_recursive(&nu, x, 1e-9)?;
                    let (py, _) = psi_recursive(&nu, y, 1e-9)?;
                    let re = (px.m * py.m.conj()).re;
                    Ok(re * (ln_c + ln_pairs + px.e + py.e).exp())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let k = paths as f64;
    let all = weights.iter().flatten();
    let mean = all.clone().sum::<f64>() / k;
    let var = all.map(|w| (w - mean) * (w - mean)).sum::<f64>() / (k - 1.0);
    Ok(DensityEstimate::monte_carlo(mean, (var / k).sqrt()))
}

/// exp(-t|μ|²/2 + μ·(x - y)) times the driftless density `base(t, y, x)`.
pub fn drift_density<F>(t: f64, y: &[f64], x: &[f64], mu: &DriftVector, base: F) -> Result<DensityEstimate>
where
    F: FnOnce(f64, &[f64], &[f64]) -> Result<DensityEstimate>,
{
    check_same_len(y, x)?;
    if mu.len() != x.len() {
        return Err(Error::domain(format!("drift has length {}, configuration {}", mu.len(), x.len())));
    }
    let dot: f64 = mu.iter().zip(x.iter().zip(y)).map(|(m, (a, b))| m * (a - b)).sum();
    let pre = (-t * mu.norm_sq() / 2.0 + dot).exp();
    Ok(base(t, y, x)?.scale(pre))
}

/// Θ_N(t, y) for N ≤ 2: the heat kernel from 0 for N = 1 and
/// p(2t, y₁+y₂|0) θ_{2e^{-(y₂-y₁)/2}}(t/2) for N = 2.
pub fn theta_n(t: f64, y: &[f64], spec: &QuadratureSpec) -> Result<ErrorBounded> {
    check_positive("t", t)?;
    spec.validate()?;
    check_same_len(y, y)?;
    match y.len() {
        1 => {
            let v = heat_kernel(t, y[0], 0.0)?;
            Ok(ErrorBounded::series(v, 4.0 * f64::EPSILON * v))
        }
        2 => {
            let p = heat_kernel(2.0 * t, y[0] + y[1], 0.0)?;
            Ok(theta(2.0 * (-0.5 * (y[1] - y[0])).exp(), 0.5 * t)?.scale(p))
        }
        n => Err(Error::Capability(format!("Theta_N is implemented for N <= 2, got {n}"))),
    }
}

/// Θ₂(t, y) from the two-dimensional ν-integral with ψ_{-iν}(y) =
/// 2e^{-i(ν₁+ν₂)(y₁+y₂)/2} K_{i(ν₁-ν₂)}(2e^{-(y₂-y₁)/2}).
pub fn theta2_spectral_double(t: f64, y: &[f64], spec: &QuadratureSpec) -> Result<ErrorBounded> {
    check_t(t)?;
    check_two(y, y)?;
    spec.validate()?;
    let b = 2.0 * (-0.5 * (y[1] - y[0])).exp();
    let g = |w: f64| {
        if w == 0.0 {
            return Ok((0.0, 0.0));
        }
        let kb = bessel_k_scaled(Order::Imaginary(w), b)?;
        let (m, l) = w_sinh(w);
        Ok((m * kb.mantissa, l + kb.exponent))
    };
    let r = lattice_double(t, y[0] + y[1], g, spec.rel_tol.max(1e-12))?;
    Ok(r.scale(1.0 / (4.0 * PI.powi(3))))
}

/// Both sides of ∫ e^{-|ν|²} ∏_{j<k} (ν_k - ν_j)² dν = (2π)^{N/2} 2^{-N²/2} ∏ n!.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelbergCheck {
    pub computed: f64,
    pub exact: f64,
    /// Zero for the tensor rule, the Monte Carlo standard error for N = 4.
    pub std_error: f64,
}

pub fn selberg_check(n: usize) -> Result<SelbergCheck> {
    if n == 0 || n > 4 {
        return Err(Error::Capability(format!("Selberg check supports 1 <= N <= 4, got {n}")));
    }
    let nf = n as f64;
    let fact: f64 = (1..=n).map(|k| (1..=k).product::<usize>() as f64).product();
    let exact = (2.0 * PI).powf(nf / 2.0) * 2f64.powf(-nf * nf / 2.0) * fact;
    let vdm2 = |v: &[f64]| {
        let mut p = 1.0;
        for k in 0..v.len() {
            for j in 0..k {
                p *= (v[k] - v[j]) * (v[k] - v[j]);
            }
        }
        p
    };
    if n <= 3 {
        // the integrand is a polynomial of degree 2(N-1) per axis
        let rule = gauss_hermite(n + 2);
        let m = rule.nodes.len();
        let mut idx = vec![0usize; n];
        let mut sum = 0.0;
        loop {
            let v: Vec<f64> = idx.iter().map(|&i| rule.nodes[i]).collect();
            let w: f64 = idx.iter().map(|&i| rule.weights[i]).product();
            sum += w * vdm2(&v);
            let mut d = 0;
            while d < n {
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == n {
                break;
            }
        }
        return Ok(SelbergCheck {
            computed: sum,
            exact,
            std_error: 0.0,
        });
    }
    // ν ~ N(0, 1/2) per axis has density e^{-ν²}/√π
    let samples = 1 << 20;
    let normal = Normal::new(0.0, 0.5f64.sqrt()).expect("positive sd");
    let chunks = samples / MC_CHUNK;
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5e1b_e125);
            rng.set_stream(c as u64);
            let mut v = [0.0; 4];
            let (mut s, mut q) = (0.0, 0.0);
            for _ in 0..MC_CHUNK {
                for x in v.iter_mut() {
                    *x = normal.sample(&mut rng);
                }
                let f = vdm2(&v);
                s += f;
                q += f * f;
            }
            (s, q)
        })
        .collect();
    let k = samples as f64;
    let (s, q) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = s / k;
    let se = ((q / k - mean * mean).max(0.0) / (k - 1.0)).sqrt();
    let c = PI * PI;
    Ok(SelbergCheck {
        computed: c * mean,
        exact,
        std_error: c * se,
    })
}

/// Both sides of ∫ Q₂(t, z|y) Q₂(s, y|x) dy = Q₂(s + t, z|x).
///
/// The y-integral runs over the centre of mass and η = (y₂ - y₁)/2 - log 2
/// (unit Jacobian); the Q⁰ factors are evaluated once per η node.
pub fn chapman_kolmogorov_q2(s: f64, t: f64, x: &[f64], z: &[f64]) -> Result<(f64, f64)> {
    check_positive("s", s)?;
    check_positive("t", t)?;
    check_two(z, x)?;
    let (sx, sz) = (x[0] + x[1], z[0] + z[1]);
    let (ex, ez) = (eta(x), eta(z));
    let spec = QuadratureSpec::new(1e-300, 1e-10);
    // centre of mass: Gaussian convolution on a box covering both kernels
    let width = 12.0 * (2.0 * (s + t)).sqrt();
    let lo = sx.min(sz) - width;
    let hi = sx.max(sz) + width;
    let fail = Failure::default();
    let com = gauss_kronrod(
        |m| fail.catch(heat_kernel(2.0 * t, sz, m).and_then(|a| Ok(a * heat_kernel(2.0 * s, m, sx)?))),
        lo,
        hi,
        &spec,
    )?;
    fail.check()?;
    let rel = integrate_line(
        |e| Ok(my_q(0.5 * t, ez, e, 0.0)?.value * my_q(0.5 * s, e, ex, 0.0)?.value),
        0.5 * (ex + ez),
        0.25 * (s + t).sqrt().max(0.5),
        &spec,
    )?;
    let lhs = com.value * rel.value;
    let rhs = q2_factorized(s + t, z, x)?.value;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::new(1e-14, 1e-10)
    }

    #[test]
    fn n1_is_heat_kernel() {
        let q = q_spectral(1.0, &[0.3], &[0.0], &spec()).unwrap();
        assert_eq!(q.value, heat_kernel(1.0, 0.3, 0.0).unwrap());
        assert!(q_spectral(1.0, &[0.0; 3], &[0.0; 3], &spec()).is_err());
        assert!(q_spectral(1e-4, &[0.0, 1.0], &[0.0, 1.0], &spec()).is_err());
    }

    #[test]
    fn q2_routes_agree() {
        let a = q2_factorized(1.0, &[0.5, 2.5], &[0.0, 2.0]).unwrap().value;
        let b = q2_spectral_double(1.0, &[0.5, 2.5], &[0.0, 2.0], &spec()).unwrap().value;
        assert!((a - b).abs() < 1e-7 * a, "{a} {b}");
    }

    #[test]
    fn q2_symmetric_and_dominated() {
        let (x, y) = ([0.0, 1.5], [0.4, 1.2]);
        let a = q2_factorized(0.8, &y, &x).unwrap().value;
        let b = q2_factorized(0.8, &x, &y).unwrap().value;
        assert!((a - b).abs() < 1e-10 * a);
        let free = heat_kernel(0.8, y[0], x[0]).unwrap() * heat_kernel(0.8, y[1], x[1]).unwrap();
        assert!(a > 0.0 && a <= free);
        let x = [0.0, 8.0];
        let r = q2_factorized(0.01, &x, &x).unwrap().value / heat_kernel(0.01, 0.0, 0.0).unwrap().powi(2);
        assert!((r - 1.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn theta2_routes_agree() {
        let y = [0.0, 2.0];
        let a = theta_n(1.0, &y, &spec()).unwrap().value;
        let b = theta2_spectral_double(1.0, &y, &spec()).unwrap().value;
        assert!((a - b).abs() < 1e-7 * a, "{a} {b}");
        let t1 = theta_n(1.0, &[0.7], &spec()).unwrap().value;
        assert!((t1 - 0.312_253_9).abs() < 1e-7, "{t1}");
    }

    #[test]
    fn selberg_small_n() {
        let s1 = selberg_check(1).unwrap();
        assert!((s1.computed - PI.sqrt()).abs() < 1e-12 && (s1.exact - PI.sqrt()).abs() < 1e-12);
        let s2 = selberg_check(2).unwrap();
        assert!((s2.exact - PI).abs() < 1e-12 && (s2.computed - PI).abs() < 1e-10);
        let s3 = selberg_check(3).unwrap();
        assert!((s3.computed / s3.exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn drift_prefactor() {
        let mu = DriftVector::new(vec![0.5]).unwrap();
        let base = |t: f64, y: &[f64], x: &[f64]| my_q(t, y[0], x[0], 0.0);
        let d = drift_density(1.0, &[0.3], &[0.0], &mu, base).unwrap().value;
        let direct = my_q(1.0, 0.3, 0.0, 0.5).unwrap().value;
        assert!((d - direct).abs() < 1e-14 * direct);
        let zero = DriftVector::zero(1);
        let d0 = drift_density(1.0, &[0.3], &[0.0], &zero, base).unwrap().value;
        assert_eq!(d0, my_q(1.0, 0.3, 0.0, 0.0).unwrap().value);
    }

    #[test]
    fn q3_mc_is_symmetric_in_x_and_y() {
        let (x, y) = ([0.0, 2.0, 4.0], [0.5, 2.0, 3.0]);
        let a = q_spectral_mc(5.0, &y, &x, 2000, 1).unwrap();
        let b = q_spectral_mc(5.0, &x, &y, 2000, 1).unwrap();
        assert!((a.value - b.value).abs() < 1e-9 * a.value.abs().max(1e-300));
        assert!(a.value > 0.0);
    }
}
