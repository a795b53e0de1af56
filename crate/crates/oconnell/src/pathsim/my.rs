//! The one-particle process: explicit construction log∫e^{2B} - B, its
//! Pitman scaling, and the diffusion with drift g_μ(η) = -(K′_μ/K_μ)(e^{-η})e^{-η}.

use super::rng::{normal, path_rng};
use super::sde::{run_sde, Field};
use super::{per_path, PathEnsemble, SimConfig};
use crate::error::{check_finite, check_positive, Error, Result};
use crate::specfun::k_log_derivative;
use rayon::prelude::*;
use std::f64::consts::LN_2;
use std::sync::{Arc, Mutex, OnceLock};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// g_μ(η) = -(K′_μ/K_μ)(e^{-η})e^{-η}, evaluated directly.
pub fn my_drift(eta: f64, mu: f64) -> Result<f64> {
    check_finite("eta", eta)?;
    let z = (-eta).exp();
    Ok(-k_log_derivative(mu, z)? * z)
}

const TABLE_LO: f64 = -8.0;
const TABLE_HI: f64 = 60.0;
const PER_UNIT: usize = 64;

/// g_μ on a uniform η-grid with cubic Hermite interpolation. Slopes are exact:
/// with h = K′_μ/K_μ at z = e^{-η}, Bessel's equation gives
/// dg/dη = z² + μ² - z²h².
pub struct DriftTable {
    mu: f64,
    g: Vec<f64>,
    dg: Vec<f64>,
}

impl DriftTable {
    pub fn new(mu: f64) -> Result<Self> {
        check_finite("mu", mu)?;
        let mu = mu.abs();
        let n = ((TABLE_HI - TABLE_LO) as usize) * PER_UNIT + 1;
        let nodes: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let eta = TABLE_LO + k as f64 / PER_UNIT as f64;
                let z = (-eta).exp();
                let h = k_log_derivative(mu, z)?;
                Ok((-h * z, z * z * (1.0 - h) * (1.0 + h) + mu * mu))
            })
            .collect::<Result<_>>()?;
        let (g, dg) = nodes.into_iter().unzip();
        Ok(DriftTable { mu, g, dg })
    }

    /// Tables are built once per μ and shared.
    pub fn shared(mu: f64) -> Result<Arc<DriftTable>> {
        type Cache = Mutex<Vec<(u64, Arc<DriftTable>)>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let key = mu.abs().to_bits();
        let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
        if let Some((_, t)) = cache.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return Ok(t.clone());
        }
        let t = Arc::new(DriftTable::new(mu)?);
        cache.lock().unwrap().push((key, t.clone()));
        Ok(t)
    }

    pub fn eval(&self, eta: f64) -> f64 {
        let mu = self.mu;
        if eta < TABLE_LO {
            // K′/K = -1 - 1/(2z) + (1 - 4μ²)/(8z²) + O(z^{-3})
            let z = (-eta).exp();
            return z + 0.5 - (1.0 - 4.0 * mu * mu) / (8.0 * z);
        }
        if eta >= TABLE_HI {
            return right_tail(eta, mu);
        }
        let u = (eta - TABLE_LO) * PER_UNIT as f64;
        let k = (u.floor() as usize).min(self.g.len() - 2);
        let s = u - k as f64;
        let step = 1.0 / PER_UNIT as f64;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.g[k] + h10 * step * self.dg[k] + h01 * self.g[k + 1] + h11 * step * self.dg[k + 1]
    }
}

// Small-z form K_μ(z) ≈ ½Γ(μ)(z/2)^{-μ} + ½Γ(-μ)(z/2)^{μ}; the z² corrections
// are below 1e-50 here.
fn right_tail(eta: f64, mu: f64) -> f64 {
    let ln_s = -eta - LN_2;
    if mu < 1e-8 {
        return 1.0 / (-ln_s - EULER_GAMMA);
    }
    if mu >= 0.5 {
        return mu;
    }
    let r = libm::tgamma(-mu) / libm::tgamma(mu) * (2.0 * mu * ln_s).exp();
    mu * (1.0 - r) / (1.0 + r)
}

struct MyField(Arc<DriftTable>);

impl Field for MyField {
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out[0] = self.0.eval(x[0]);
        Ok(())
    }
}

/// Trajectories of dη = dB + g_μ(η) dt from `x0`.
pub fn sde_my(cfg: &SimConfig, x0: f64, mu: f64) -> Result<PathEnsemble> {
    if cfg.n_particles != 1 {
        return Err(Error::Config("sde_my simulates one particle".into()));
    }
    run_sde(cfg, &[x0], &MyField(DriftTable::shared(mu)?))
}

/// Running log Σ c_k e^{a_k} without overflow.
struct LogSum {
    max: f64,
    acc: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            acc: 0.0,
        }
    }

    fn add(&mut self, ln_term: f64) {
        if ln_term > self.max {
            self.acc = self.acc * (self.max - ln_term).exp() + 1.0;
            self.max = ln_term;
        } else {
            self.acc += (ln_term - self.max).exp();
        }
    }

    fn ln(&self) -> f64 {
        self.max + self.acc.ln()
    }
}

/// Z^μ(t) = log ∫₀^t e^{2B^μ(s)} ds - B^μ(t) with B^μ(s) = B(s) + μs, one value
/// per path; trapezoid rule on the step grid, accumulated in log space.
pub fn my_explicit(cfg: &SimConfig, mu: f64) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_finite("mu", mu)?;
    let steps = cfg.steps();
    let dt = cfg.step();
    let sq = dt.sqrt();
    per_path(cfg.paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let mut b = 0.0;
        let mut ls = LogSum::new();
        ls.add(-LN_2);
        for k in 1..=steps {
            b += mu * dt + sq * normal(&mut rng);
            ls.add(2.0 * b - if k == steps { LN_2 } else { 0.0 });
        }
        Ok(ls.ln() + dt.ln() - b)
    })
}

/// εZ⁰(t/ε²), simulated through Brownian scaling as
/// ε log ∫₀^t e^{2W(u)/ε} du - 2ε log ε - W(t).
///
/// Each step integrates e^{2W/ε} exactly for W linear on the step; the
/// trapezoid rule would need dt ≪ ε².
pub fn pitman_scaled(cfg: &SimConfig, eps: f64) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_positive("eps", eps)?;
    let steps = cfg.steps();
    let dt = cfg.step();
    let sq = dt.sqrt();
    let c = 2.0 / eps;
    per_path(cfg.paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let mut w = 0.0;
        let mut ls = LogSum::new();
        for _ in 0..steps {
            let a = c * w;
            w += sq * normal(&mut rng);
            let b = c * w;
            let d = (b - a).abs();
            // ∫ e^{a + (b-a)s/dt} ds = dt e^{max} (1 - e^{-d})/d
            let shape = if d < 1e-8 { -0.5 * d } else { (-(-d).exp_m1() / d).ln() };
            ls.add(a.max(b) + dt.ln() + shape);
        }
        Ok(eps * ls.ln() - 2.0 * eps * eps.ln() - w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathsim::stats::{ks_one_sample, ks_two_sample, McEstimate};
    use crate::pathsim::Scheme;

    #[test]
    fn table_matches_direct() {
        for mu in [0.0, 0.01, 0.3, 1.0] {
            let t = DriftTable::new(mu).unwrap();
            for eta in [-14.0, -11.99, -8.01, -7.99, -3.3, 0.0, 0.123, 7.7, 30.1, 59.9, 65.0] {
                let exact = my_drift(eta, mu).unwrap();
                let got = t.eval(eta);
                assert!((got - exact).abs() <= 1e-9 * exact.abs(), "mu {mu} eta {eta}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn drift_asymptotics() {
        // deep right: logarithmic decay 1/(η + log 2 - γ)
        let g = my_drift(6.0, 0.0).unwrap();
        assert!((g - 1.0 / (6.0 + LN_2 - EULER_GAMMA)).abs() < 1e-3, "{g}");
        // deep left: g ≈ e^{-η} + 1/2
        let g = my_drift(-6.0, 0.0).unwrap();
        assert!((g - 6f64.exp() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn deep_left_start_is_pushed_right() {
        let cfg = SimConfig::new(1, 0.5, 1e-3, 10_000, 8).unwrap().with_scheme(Scheme::Adaptive);
        let e = sde_my(&cfg, -6.0, 0.0).unwrap();
        let above = e.coordinate(0).iter().filter(|v| **v > -4.0).count();
        assert!(above as f64 >= 0.99 * e.len() as f64);
    }

    #[test]
    fn drift_sign_symmetry_in_law() {
        // K_μ = K_{-μ}: the explicit construction at ±μ has one law
        let cfg = SimConfig::new(1, 1.0, 1e-3, 20_000, 6).unwrap();
        let a = my_explicit(&cfg, 0.5).unwrap();
        let b = my_explicit(&SimConfig { seed: 77, ..cfg.clone() }, -0.5).unwrap();
        let (ma, mb) = (McEstimate::from_samples(&a).unwrap(), McEstimate::from_samples(&b).unwrap());
        assert!(ma.z_score(mb.value, mb.std_error) < 5.0);
        assert!(ks_two_sample(&a, &b) < 0.03);
    }

    #[test]
    fn pitman_limit_shape() {
        let cfg = SimConfig::new(1, 1.0, 1e-3, 20_000, 12).unwrap();
        let z = pitman_scaled(&cfg, 0.05).unwrap();
        let bes3 = |r: f64| {
            if r <= 0.0 {
                0.0
            } else {
                libm::erf(r / 2f64.sqrt()) - (2.0 / std::f64::consts::PI).sqrt() * r * (-0.5 * r * r).exp()
            }
        };
        let d = ks_one_sample(&z, bes3);
        assert!(d < 0.05, "{d}");
    }
}
