//! Path simulation: Feynman–Kac weights for killed Brownian motions, the
//! explicit exponential-functional construction of the one-particle process,
//! and Euler-type integrators for the conditioned, Dyson and one-particle
//! diffusions.
//!
//! Every routine takes a [`SimConfig`]. Path `i` draws from its own RNG stream
//! (see [`rng`]), per-path results are collected in path order and reduced
//! with compensated sums, so outputs are bit-identical for any thread count.

mod fk;
mod my;
pub mod rng;
mod sde;
pub mod stats;

pub use fk::{fk_density, fk_density_bridge, fk_survival, fk_weight, simulate_fk, FkDensity, Potential};
pub use my::{my_drift, my_explicit, pitman_scaled, sde_my, DriftTable};
pub use sde::{scaling_limit_check, sde_dyson, sde_oconnell, sde_oconnell_scaled, ScalingReport};
pub use stats::{Histogram, McEstimate};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    /// Drift replaced by F/(1 + dt|F|) when |F|dt > 0.5.
    TamedEuler,
    /// Steps are bisected along a Brownian bridge while the drift
    /// displacement is large compared with the local length scale.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KillMode {
    /// Each path carries exp(-∫V).
    Weighted,
    /// Each path is killed with probability 1 - exp(-V dt) per step.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_particles: usize,
    pub t_final: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub kill_mode: KillMode,
}

impl SimConfig {
    pub fn new(n_particles: usize, t_final: f64, dt: f64, paths: usize, seed: u64) -> Result<Self> {
        let c = SimConfig {
            n_particles,
            t_final,
            dt,
            paths,
            seed,
            scheme: Scheme::Euler,
            kill_mode: KillMode::Weighted,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_kill_mode(mut self, kill_mode: KillMode) -> Self {
        self.kill_mode = kill_mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::Config("n_particles must be at least 1".into()));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if !(self.dt > 0.0) || self.dt > self.t_final {
            return Err(Error::Config(format!(
                "dt must lie in (0, t_final], got {} with t_final {}",
                self.dt, self.t_final
            )));
        }
        if self.paths == 0 {
            return Err(Error::Config("paths must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps; the step actually used is t_final / steps.
    pub fn steps(&self) -> usize {
        let r = self.t_final / self.dt;
        if (r - r.round()).abs() <= 1e-9 * r {
            r.round() as usize
        } else {
            r.ceil() as usize
        }
    }

    pub fn step(&self) -> f64 {
        self.t_final / self.steps() as f64
    }

    pub(crate) fn check_start(&self, x0: &[f64]) -> Result<()> {
        if x0.len() != self.n_particles {
            return Err(Error::Config(format!(
                "start has {} coordinates but n_particles = {}",
                x0.len(),
                self.n_particles
            )));
        }
        for &v in x0 {
            crate::error::check_finite("start", v)?;
        }
        Ok(())
    }
}

/// Terminal configurations of an ensemble with their survival weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub n_particles: usize,
    /// Row-major, `n_particles` values per path.
    pub positions: Vec<f64>,
    /// exp(-∫V) in weighted mode, 0 or 1 in bernoulli mode, 1 for SDEs.
    pub weights: Vec<f64>,
    /// RNG stream of each path under the run seed.
    pub streams: Vec<u64>,
}

impl PathEnsemble {
    pub(crate) fn from_rows(n: usize, rows: Vec<(Vec<f64>, f64)>) -> Self {
        let mut positions = Vec::with_capacity(n * rows.len());
        let mut weights = Vec::with_capacity(rows.len());
        for (x, w) in &rows {
            positions.extend_from_slice(x);
            weights.push(*w);
        }
        let streams = (0..rows.len() as u64).map(rng::path_stream).collect();
        PathEnsemble {
            n_particles: n,
            positions,
            weights,
            streams,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.positions[i * self.n_particles..(i + 1) * self.n_particles]
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.positions.iter().skip(j).step_by(self.n_particles).copied().collect()
    }

    /// x_{j+1} - x_j for every path.
    pub fn gaps(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.position(i)[j + 1] - self.position(i)[j]).collect()
    }

    /// Mean weight with its standard error.
    pub fn survival(&self) -> Result<McEstimate> {
        McEstimate::from_samples(&self.weights)
    }

    /// Positions of the paths with positive weight (all of them in weighted mode).
    pub fn alive(&self) -> Vec<&[f64]> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).map(|i| self.position(i)).collect()
    }
}

pub(crate) use rayon::prelude::*;

/// Runs `f` for every path index in parallel and returns results in order.
pub(crate) fn per_path<T, F>(paths: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..paths as u64).into_par_iter().map(f).collect()
}
