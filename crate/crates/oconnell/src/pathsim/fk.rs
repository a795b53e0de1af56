//! Feynman–Kac Monte Carlo for Brownian motions killed at rate V.

use super::rng::{aux_rng, bootstrap_rng, normal, path_rng};
use super::stats::{effective_sample_size, gauss_kernel, silverman, sum, weighted_sd, McEstimate};
use super::{per_path, KillMode, PathEnsemble, SimConfig};
use crate::densities::{heat_kernel, DensityEstimate};
use crate::error::{check_positive, Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    /// Σ_j e^{-(x_{j+1} - x_j)/ε}; no killing for one particle.
    Toda { eps: f64 },
    /// e^{-2x}/2 for a single particle.
    Morse,
}

impl Potential {
    pub fn toda() -> Self {
        Potential::Toda { eps: 1.0 }
    }

    pub fn rate(&self, x: &[f64]) -> f64 {
        match *self {
            Potential::Toda { eps } => x.windows(2).map(|p| (-(p[1] - p[0]) / eps).exp()).sum(),
            Potential::Morse => 0.5 * (-2.0 * x[0]).exp(),
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match *self {
            Potential::Toda { eps } => check_positive("eps", eps),
            Potential::Morse if n == 1 => Ok(()),
            Potential::Morse => Err(Error::Config("the Morse potential is for one particle".into())),
        }
    }
}

/// exp(-Σ_j ∫ e^{-(B_{j+1} - B_j)/ε} ds) along a path sampled on a uniform
/// grid with spacing `dt`, time integral by the trapezoid rule.
pub fn fk_weight(path: &[Vec<f64>], dt: f64, eps: f64) -> Result<f64> {
    check_positive("dt", dt)?;
    let pot = Potential::Toda { eps };
    pot.check(1)?;
    let rates: Vec<f64> = path.iter().map(|x| pot.rate(x)).collect();
    let integral = rates.windows(2).map(|r| 0.5 * dt * (r[0] + r[1])).sum::<f64>();
    Ok((-integral).exp())
}

/// Where path increments come from.
enum Increments<'a> {
    /// Brownian motion with constant velocity.
    Free(&'a [f64]),
    /// Brownian bridge to a fixed end point at t_final.
    Bridge(&'a [f64]),
}

fn fk_path(cfg: &SimConfig, x0: &[f64], inc: &Increments, pot: Potential, path: u64) -> (Vec<f64>, f64) {
    let steps = cfg.steps();
    let dt = cfg.step();
    let sq = dt.sqrt();
    let mut rng = path_rng(cfg.seed, path);
    let mut kill = aux_rng(cfg.seed, path);
    let mut x = x0.to_vec();
    let mut v_prev = pot.rate(&x);
    let mut integral = 0.0;
    let mut alive = true;
    for k in 0..steps {
        match inc {
            Increments::Free(drift) => {
                for (xj, d) in x.iter_mut().zip(drift.iter()) {
                    *xj += d * dt + sq * normal(&mut rng);
                }
            }
            Increments::Bridge(end) => {
                let left = (steps - k) as f64 * dt;
                let var = dt * (left - dt) / left;
                for (xj, e) in x.iter_mut().zip(end.iter()) {
                    *xj += (e - *xj) * dt / left + var.max(0.0).sqrt() * normal(&mut rng);
                }
            }
        }
        let v = pot.rate(&x);
        let piece = 0.5 * dt * (v_prev + v);
        integral += piece;
        if cfg.kill_mode == KillMode::Bernoulli && alive {
            let u: f64 = kill.random();
            if u < -(-piece).exp_m1() {
                alive = false;
            }
        }
        v_prev = v;
    }
    let w = match cfg.kill_mode {
        KillMode::Weighted => (-integral).exp(),
        KillMode::Bernoulli => f64::from(u8::from(alive)),
    };
    (x, w)
}

/// Simulates Brownian motions from `x0` with constant velocity `drift`,
/// weighted (or thinned) by the potential.
pub fn simulate_fk(cfg: &SimConfig, x0: &[f64], drift: &[f64], pot: Potential) -> Result<PathEnsemble> {
    cfg.validate()?;
    cfg.check_start(x0)?;
    pot.check(x0.len())?;
    if drift.len() != x0.len() {
        return Err(Error::Config("drift and start differ in length".into()));
    }
    let inc = Increments::Free(drift);
    let rows = per_path(cfg.paths, |i| Ok(fk_path(cfg, x0, &inc, pot, i)))?;
    Ok(PathEnsemble::from_rows(x0.len(), rows))
}

/// Kernel estimate of Q_N(t,y|x) with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkDensity {
    /// Value and bootstrap standard error.
    pub estimate: DensityEstimate,
    pub bandwidth: Vec<f64>,
    /// Leading smoothing bias Σ_j h_j²/2 ∂_j²Q, estimated from the same sample.
    pub smoothing_bias: f64,
    /// Step used; the weight quadrature is biased at O(dt).
    pub dt: f64,
    pub effective_samples: f64,
}

const BOOTSTRAP: usize = 200;

/// Q_N(t,y|x) as a weighted Gaussian-kernel estimate over killed paths.
/// Bandwidth per coordinate defaults to Silverman's rule.
pub fn fk_density(cfg: &SimConfig, x: &[f64], y: &[f64], bandwidth: Option<&[f64]>) -> Result<FkDensity> {
    if y.len() != x.len() {
        return Err(Error::Config("x and y differ in length".into()));
    }
    let n = x.len();
    let ens = simulate_fk(cfg, x, &vec![0.0; n], Potential::toda())?;
    let w = &ens.weights;
    let n_eff = effective_sample_size(w);
    if !(n_eff > 0.0) {
        return Err(Error::Estimation("every path was killed; zero effective sample size".into()));
    }
    let h: Vec<f64> = match bandwidth {
        Some(b) if b.len() == n => {
            for &v in b {
                check_positive("bandwidth", v)?;
            }
            b.to_vec()
        }
        Some(_) => return Err(Error::Config("bandwidth needs one value per coordinate".into())),
        None => (0..n).map(|j| silverman(weighted_sd(&ens.coordinate(j), w), n_eff, n)).collect(),
    };
    let m = ens.len();
    let mut contrib = Vec::with_capacity(m);
    let mut curvature = Vec::with_capacity(m);
    for (i, &wi) in w.iter().enumerate().take(m) {
        let p = ens.position(i);
        let mut k = wi;
        let mut lap = 0.0;
        for j in 0..n {
            let u = (p[j] - y[j]) / h[j];
            k *= gauss_kernel(u) / h[j];
            // h²/2 times the second y-derivative of the kernel
            lap += 0.5 * (u * u - 1.0);
        }
        contrib.push(k);
        curvature.push(k * lap);
    }
    let value = sum(contrib.iter().copied()) / m as f64;
    let smoothing_bias = sum(curvature.iter().copied()) / m as f64;
    let mut rng = bootstrap_rng(cfg.seed);
    let reps: Vec<f64> = (0..BOOTSTRAP)
        .map(|_| sum((0..m).map(|_| contrib[rng.random_range(0..m)])) / m as f64)
        .collect();
    let se = McEstimate::from_samples(&reps)?.std_error * (BOOTSTRAP as f64).sqrt();
    Ok(FkDensity {
        estimate: DensityEstimate::monte_carlo(value, se),
        bandwidth: h,
        smoothing_bias,
        dt: cfg.step(),
        effective_samples: n_eff,
    })
}

/// Q_N(t,y|x) = ∏_j p(t, y_j|x_j) · E[w] over Brownian bridges from x to y.
/// No smoothing bias; only the O(dt) weight quadrature error remains.
pub fn fk_density_bridge(cfg: &SimConfig, x: &[f64], y: &[f64]) -> Result<DensityEstimate> {
    cfg.validate()?;
    cfg.check_start(x)?;
    cfg.check_start(y)?;
    let inc = Increments::Bridge(y);
    let pot = Potential::toda();
    let rows = per_path(cfg.paths, |i| Ok(fk_path(cfg, x, &inc, pot, i).1))?;
    let est = McEstimate::from_samples(&rows)?;
    let mut free = 1.0;
    for (a, b) in x.iter().zip(y) {
        free *= heat_kernel(cfg.t_final, *b, *a)?;
    }
    Ok(DensityEstimate::monte_carlo(est.value * free, est.std_error * free))
}

/// Mean survival weight up to t_final from `x` for the drifted model.
///
/// The survival integral over end points with drift μ equals the survival of
/// Brownian motion with velocity -μ started at `x`, which is what is simulated.
pub fn fk_survival(cfg: &SimConfig, x: &[f64], mu: &[f64], pot: Potential) -> Result<McEstimate> {
    let drift: Vec<f64> = mu.iter().map(|m| -m).collect();
    simulate_fk(cfg, x, &drift, pot)?.survival()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::{my_survival, q_spectral};
    use crate::quad::QuadratureSpec;

    #[test]
    fn weight_examples() {
        let one = vec![vec![0.3]; 11];
        assert_eq!(fk_weight(&one, 0.1, 1.0).unwrap(), 1.0);
        let wide: Vec<Vec<f64>> = (0..11).map(|k| vec![k as f64 * 0.1, 40.0 + k as f64 * 0.1]).collect();
        assert!(fk_weight(&wide, 0.1, 1.0).unwrap() >= 1.0 - 1e-10);
        let ordered: Vec<Vec<f64>> = (0..101).map(|k| vec![0.0, 0.5 + 0.001 * k as f64]).collect();
        let swapped: Vec<Vec<f64>> = ordered.iter().map(|p| vec![p[1], p[0]]).collect();
        assert!(fk_weight(&ordered, 0.01, 0.02).unwrap() > 1.0 - 1e-9);
        assert!(fk_weight(&swapped, 0.01, 0.02).unwrap() < 1e-8);
    }

    #[test]
    fn one_particle_is_heat_kernel() {
        let cfg = SimConfig::new(1, 1.0, 0.1, 100_000, 7).unwrap();
        let d = fk_density(&cfg, &[0.0], &[0.5], None).unwrap();
        let exact = heat_kernel(1.0, 0.5, 0.0).unwrap();
        let e = d.estimate;
        assert!((e.value - exact).abs() < 3.0 * e.error_bound, "{e:?} {exact}");
    }

    #[test]
    fn bridge_matches_spectral() {
        let cfg = SimConfig::new(2, 1.0, 1e-3, 20_000, 11).unwrap();
        let (x, y) = ([0.0, 2.0], [0.5, 2.5]);
        let mc = fk_density_bridge(&cfg, &x, &y).unwrap();
        let q = q_spectral(1.0, &y, &x, &QuadratureSpec::default()).unwrap();
        assert!((mc.value - q.value).abs() < 3.0 * mc.error_bound, "{mc:?} {q:?}");
    }

    #[test]
    fn kill_modes_agree_and_survival_decreases() {
        let cfg = SimConfig::new(2, 1.0, 1e-2, 20_000, 3).unwrap();
        let x = [0.0, 1.0];
        let a = fk_survival(&cfg, &x, &[0.0, 0.0], Potential::toda()).unwrap();
        let b = fk_survival(&cfg.clone().with_kill_mode(KillMode::Bernoulli), &x, &[0.0, 0.0], Potential::toda()).unwrap();
        assert!(a.z_score(b.value, b.std_error) < 3.0, "{a:?} {b:?}");
        // doubling the horizon extends the same paths
        let long = SimConfig::new(2, 2.0, 1e-2, 20_000, 3).unwrap();
        let e1 = simulate_fk(&cfg, &x, &[0.0, 0.0], Potential::toda()).unwrap();
        let e2 = simulate_fk(&long, &x, &[0.0, 0.0], Potential::toda()).unwrap();
        assert!(e1.weights.iter().zip(&e2.weights).all(|(p, q)| q <= p && *q > 0.0 && *p <= 1.0));
    }

    #[test]
    fn discretization_bias_shrinks_with_dt() {
        // a crossed start kills strongly, which makes the step bias visible
        let x = [0.0, -1.0];
        let exact = crate::densities::survival_n(1.0, &x, &[0.0, 0.0], &QuadratureSpec::default()).unwrap().value;
        let bias: Vec<f64> = [0.4, 0.2, 0.1]
            .iter()
            .map(|&dt| {
                let cfg = SimConfig::new(2, 1.0, dt, 4_000_000, 7).unwrap();
                let m = fk_survival(&cfg, &x, &[0.0, 0.0], Potential::toda()).unwrap();
                assert!(m.value - exact < -2.0 * m.std_error, "dt {dt}: {m:?} vs {exact}");
                m.value - exact
            })
            .collect();
        for p in bias.windows(2) {
            let r = p[0] / p[1];
            assert!((1.5..=4.5).contains(&r), "{bias:?}");
        }
    }

    #[test]
    fn morse_survival_matches_quadrature() {
        let cfg = SimConfig::new(1, 1.0, 1e-3, 20_000, 5).unwrap();
        let mc = fk_survival(&cfg, &[0.0], &[0.0], Potential::Morse).unwrap();
        let exact = my_survival(1.0, 0.0, 0.0).unwrap().value;
        assert!(mc.z_score(exact, 0.0) < 3.0, "{mc:?} {exact}");
    }

    #[test]
    fn short_horizon_survives() {
        let cfg = SimConfig::new(2, 1e-3, 1e-4, 1000, 1).unwrap();
        let s = fk_survival(&cfg, &[0.0, 5.0], &[0.0, 0.0], Potential::toda()).unwrap();
        assert!(s.value >= 0.999);
    }
}
