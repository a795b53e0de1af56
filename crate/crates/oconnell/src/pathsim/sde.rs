//! Euler-type integrators for the conditioned, Dyson and scaled diffusions.

use super::my::DriftTable;
use super::rng::{normal, path_rng};
use super::stats::ks_two_sample;
use super::{per_path, PathEnsemble, Scheme, SimConfig};
use crate::error::{check_positive, Error, Result};
use crate::whittaker::{drift_field, in_weyl_chamber};
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::sync::Arc;

/// Bisections allowed below one nominal step.
const MAX_DEPTH: u32 = 48;
/// Adaptive steps keep |F| dt below this fraction of the field's length scale.
const ADAPT: f64 = 0.2;

pub(crate) trait Field: Sync {
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()>;

    /// Distance over which the drift changes appreciably.
    fn scale(&self, _x: &[f64]) -> f64 {
        1.0
    }
}

struct Stepper<'a, F: Field> {
    field: &'a F,
    scheme: Scheme,
    f: Vec<f64>,
    trial: Vec<f64>,
}

impl<F: Field> Stepper<'_, F> {
    fn advance(&mut self, x: &mut [f64], dt: f64, dw: &[f64], rng: &mut ChaCha8Rng, depth: u32) -> Result<()> {
        self.field.eval(x, &mut self.f)?;
        let norm = self.f.iter().map(|v| v * v).sum::<f64>().sqrt();
        let disp = norm * dt;
        let split = self.scheme == Scheme::Adaptive && disp > ADAPT * self.field.scale(x);
        if !split {
            let tame = if self.scheme == Scheme::TamedEuler && disp > 0.5 {
                1.0 / (1.0 + disp)
            } else {
                1.0
            };
            for j in 0..x.len() {
                self.trial[j] = x[j] + tame * self.f[j] * dt + dw[j];
            }
            x.copy_from_slice(&self.trial);
            return Ok(());
        }
        if depth >= MAX_DEPTH {
            return Err(Error::Integration(format!(
                "step rejected {MAX_DEPTH} times near {x:?}; use a smaller dt or the adaptive scheme"
            )));
        }
        // Brownian bridge midpoint of the increment
        let s = (0.25 * dt).sqrt();
        let first: Vec<f64> = dw.iter().map(|w| 0.5 * w + s * normal(rng)).collect();
        let second: Vec<f64> = dw.iter().zip(&first).map(|(w, a)| w - a).collect();
        self.advance(x, 0.5 * dt, &first, rng, depth + 1)?;
        self.advance(x, 0.5 * dt, &second, rng, depth + 1)
    }
}

pub(crate) fn run_sde<F: Field>(cfg: &SimConfig, x0: &[f64], field: &F) -> Result<PathEnsemble> {
    cfg.validate()?;
    cfg.check_start(x0)?;
    let n = x0.len();
    let steps = cfg.steps();
    let dt = cfg.step();
    let sq = dt.sqrt();
    let rows = per_path(cfg.paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let mut st = Stepper {
            field,
            scheme: cfg.scheme,
            f: vec![0.0; n],
            trial: vec![0.0; n],
        };
        let mut x = x0.to_vec();
        let mut dw = vec![0.0; n];
        for _ in 0..steps {
            for w in dw.iter_mut() {
                *w = sq * normal(&mut rng);
            }
            st.advance(&mut x, dt, &dw, &mut rng, 0)?;
        }
        Ok((x, 1.0))
    })?;
    Ok(PathEnsemble::from_rows(n, rows))
}

/// ∇ log ψ₀ scaled as (1/ε)F(x/ε); ε = 1 is the conditioned process itself.
struct OConnell {
    eps: f64,
    table: Option<Arc<DriftTable>>,
}

impl OConnell {
    fn new(n: usize, eps: f64) -> Result<Self> {
        check_positive("eps", eps)?;
        let table = if n == 2 { Some(DriftTable::shared(0.0)?) } else { None };
        Ok(OConnell { eps, table })
    }
}

impl Field for OConnell {
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let e = self.eps;
        match &self.table {
            Some(t) => {
                // relative coordinate η = gap/2 - log 2 runs the one-particle
                // model at half speed, so F₁ = -g(η)/2
                let eta = 0.5 * (x[1] - x[0]) / e - LN_2;
                let f1 = -0.5 * t.eval(eta) / e;
                out[0] = f1;
                out[1] = -f1;
            }
            None => {
                let y: Vec<f64> = x.iter().map(|v| v / e).collect();
                for (o, f) in out.iter_mut().zip(drift_field(&y)?) {
                    *o = f / e;
                }
            }
        }
        Ok(())
    }

    fn scale(&self, x: &[f64]) -> f64 {
        let g = x.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
        self.eps.max(g)
    }
}

/// Trajectories of dZ = dB + ∇log ψ₀(Z) dt from `x0`.
pub fn sde_oconnell(cfg: &SimConfig, x0: &[f64]) -> Result<PathEnsemble> {
    sde_oconnell_scaled(cfg, x0, 1.0)
}

/// The process εZ(t/ε²), which solves dX = dB + (1/ε)F(X/ε) dt.
pub fn sde_oconnell_scaled(cfg: &SimConfig, x0: &[f64], eps: f64) -> Result<PathEnsemble> {
    if !(1..=4).contains(&x0.len()) {
        return Err(Error::Capability(format!("drift field supports N <= 4, got {}", x0.len())));
    }
    run_sde(cfg, x0, &OConnell::new(x0.len(), eps)?)
}

/// Drift-implicit Euler step for Dyson's model: x = a + h F(x) with a the
/// explicit part. It is the minimizer of |x - a|²/2h - Σ_{j<k} log(x_k - x_j),
/// which is strictly convex on the Weyl chamber, so every step stays ordered.
fn dyson_implicit(a: &[f64], h: f64, start: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    if n == 2 {
        // gap g solves g² - (a₂ - a₁)g - 2h = 0
        let c = 0.5 * (a[0] + a[1]);
        let d = a[1] - a[0];
        let root = (d * d + 8.0 * h).sqrt();
        let g = if d >= 0.0 { 0.5 * (d + root) } else { 4.0 * h / (root - d) };
        return Ok(vec![c - 0.5 * g, c + 0.5 * g]);
    }
    let objective = |x: &[f64]| -> f64 {
        let mut v = 0.0;
        for j in 0..n {
            v += (x[j] - a[j]).powi(2) / (2.0 * h);
            for k in j + 1..n {
                v -= (x[k] - x[j]).ln();
            }
        }
        v
    };
    let mut x = start.to_vec();
    for _ in 0..100 {
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::identity(n, n) / h;
        for j in 0..n {
            grad[j] = (x[j] - a[j]) / h;
            for k in 0..n {
                if k != j {
                    let inv = 1.0 / (x[j] - x[k]);
                    grad[j] -= inv;
                    hess[(j, j)] += inv * inv;
                    hess[(j, k)] -= inv * inv;
                }
            }
        }
        let step = match hess.cholesky() {
            Some(c) => c.solve(&grad),
            None => return Err(Error::Integration("implicit Dyson step lost convexity".into())),
        };
        let size = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let gap = x.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
        if size <= 1e-13 * gap {
            let next: Vec<f64> = x.iter().zip(step.iter()).map(|(v, s)| v - s).collect();
            return Ok(if in_weyl_chamber(&next) { next } else { x });
        }
        let f0 = objective(&x);
        let mut lambda = 1.0;
        loop {
            let next: Vec<f64> = x.iter().zip(step.iter()).map(|(v, s)| v - lambda * s).collect();
            // the slack lets full Newton steps through once changes are at rounding level
            if in_weyl_chamber(&next) && objective(&next) <= f0 + 1e-14 * f0.abs() {
                x = next;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-20 {
                return Err(Error::Integration("implicit Dyson step stalled; use a smaller dt".into()));
            }
        }
    }
    Err(Error::Integration("implicit Dyson step did not converge; use a smaller dt".into()))
}

/// Dyson's Brownian motion dX_j = dB_j + Σ_{k≠j} dt/(X_j - X_k), stepped
/// drift-implicitly so that no path ever leaves the Weyl chamber. The
/// scheme setting does not apply.
pub fn sde_dyson(cfg: &SimConfig, x0: &[f64]) -> Result<PathEnsemble> {
    cfg.validate()?;
    cfg.check_start(x0)?;
    if !in_weyl_chamber(x0) {
        return Err(Error::domain("start must be strictly ordered"));
    }
    let n = x0.len();
    let steps = cfg.steps();
    let dt = cfg.step();
    let sq = dt.sqrt();
    let rows = per_path(cfg.paths, |i| {
        let mut rng = path_rng(cfg.seed, i);
        let mut x = x0.to_vec();
        let mut a = vec![0.0; n];
        for _ in 0..steps {
            for j in 0..n {
                a[j] = x[j] + sq * normal(&mut rng);
            }
            x = dyson_implicit(&a, dt, &x)?;
        }
        Ok((x, 1.0))
    })?;
    Ok(PathEnsemble::from_rows(n, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub eps: Vec<f64>,
    /// Largest KS distance over the gap coordinates, per ε.
    pub ks: Vec<f64>,
    /// Whether ks decreases along `eps` (given in decreasing order).
    pub monotone: bool,
}

/// Compares gap laws of εZ(t/ε²) with Dyson's Brownian motion from the same
/// start. Both ensembles use the same seed, so the comparison is coupled.
pub fn scaling_limit_check(eps: &[f64], cfg: &SimConfig, x0: &[f64]) -> Result<ScalingReport> {
    if !(2..=3).contains(&x0.len()) {
        return Err(Error::Capability("the scaling check is for N = 2 or 3".into()));
    }
    let dyson = sde_dyson(cfg, x0)?;
    let mut ks = Vec::with_capacity(eps.len());
    for &e in eps {
        let oc = sde_oconnell_scaled(cfg, x0, e)?;
        let d = (0..x0.len() - 1)
            .map(|j| ks_two_sample(&oc.gaps(j), &dyson.gaps(j)))
            .fold(0.0, f64::max);
        ks.push(d);
    }
    let monotone = ks.windows(2).all(|p| p[1] < p[0]);
    Ok(ScalingReport {
        eps: eps.to_vec(),
        ks,
        monotone,
    })
}
