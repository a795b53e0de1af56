//! Ensemble statistics: compensated sums, KS distances, kernel estimates and
//! histograms.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Neumaier-compensated sum. Taken over a fixed order, so the result does not
/// depend on how the values were produced.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn from_samples(x: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 {
            return Err(Error::Estimation(format!("need at least 2 samples, got {n}")));
        }
        let m = sum(x.iter().copied()) / n as f64;
        let v = sum(x.iter().map(|v| (v - m) * (v - m))) / (n - 1) as f64;
        Ok(McEstimate {
            value: m,
            std_error: (v / n as f64).sqrt(),
            samples: n,
        })
    }

    /// |a - b| in units of the combined standard error.
    pub fn z_score(&self, other: f64, other_error: f64) -> f64 {
        (self.value - other).abs() / self.std_error.hypot(other_error)
    }
}

pub fn mean(x: &[f64]) -> f64 {
    sum(x.iter().copied()) / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    sum(x.iter().map(|v| (v - m) * (v - m))) / (x.len() as f64 - 1.0)
}

/// Quantile by linear interpolation between order statistics (type 7).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (h.floor() as usize).min(n - 2);
    sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov–Smirnov statistic sup|F_a - F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(x: &[f64], cdf: F) -> f64 {
    let s = sorted(x);
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &v) in s.iter().enumerate() {
        let f = cdf(v);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// CDF of a density known only pointwise, tabulated on [lo, hi] by Simpson
/// panels and normalized to the mass inside the window.
pub struct TabulatedCdf {
    lo: f64,
    step: f64,
    cum: Vec<f64>,
    /// Mass found in the window before normalization.
    pub mass: f64,
}

impl TabulatedCdf {
    pub fn new<F: FnMut(f64) -> Result<f64>>(mut density: F, lo: f64, hi: f64, panels: usize) -> Result<Self> {
        if !(hi > lo) || panels == 0 {
            return Err(Error::Config("empty tabulation window".into()));
        }
        let step = (hi - lo) / panels as f64;
        let mut cum = Vec::with_capacity(panels + 1);
        cum.push(0.0);
        let mut left = density(lo)?;
        let mut acc = 0.0;
        for k in 0..panels {
            let a = lo + k as f64 * step;
            let mid = density(a + 0.5 * step)?;
            let right = density(a + step)?;
            acc += step / 6.0 * (left + 4.0 * mid + right);
            cum.push(acc);
            left = right;
        }
        if !(acc > 0.0) {
            return Err(Error::Estimation("density has no mass in the window".into()));
        }
        for c in &mut cum {
            *c /= acc;
        }
        Ok(TabulatedCdf { lo, step, cum, mass: acc })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let u = (x - self.lo) / self.step;
        if u <= 0.0 {
            return 0.0;
        }
        let i = u.floor() as usize;
        if i + 1 >= self.cum.len() {
            return 1.0;
        }
        let f = u - i as f64;
        self.cum[i] + f * (self.cum[i + 1] - self.cum[i])
    }
}

/// Silverman's rule for one coordinate of a d-dimensional Gaussian KDE with
/// effective sample size n.
pub fn silverman(sd: f64, n_eff: f64, d: usize) -> f64 {
    sd * (4.0 / ((d as f64 + 2.0) * n_eff)).powf(1.0 / (d as f64 + 4.0))
}

/// Weighted standard deviation.
pub fn weighted_sd(x: &[f64], w: &[f64]) -> f64 {
    let sw = sum(w.iter().copied());
    let m = sum(x.iter().zip(w).map(|(a, b)| a * b)) / sw;
    (sum(x.iter().zip(w).map(|(a, b)| b * (a - m) * (a - m))) / sw).sqrt()
}

/// (Σw)² / Σw².
pub fn effective_sample_size(w: &[f64]) -> f64 {
    let s = sum(w.iter().copied());
    let s2 = sum(w.iter().map(|v| v * v));
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

pub(crate) fn gauss_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Histogram with uniform bins over [lo, hi]; optionally weighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Weight sums per bin.
    pub counts: Vec<f64>,
    /// Total weight in range; density = count / (normalization · width).
    pub normalization: f64,
    /// Set when the histogram is a KDE evaluated at the bin centres.
    pub bandwidth: Option<f64>,
}

impl Histogram {
    pub fn new(x: &[f64], weights: Option<&[f64]>, lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::Config(format!("bad histogram range [{lo}, {hi}] with {bins} bins")));
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
        let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); bins];
        for (i, &v) in x.iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[i]);
            if v >= lo && v < hi {
                let k = (((v - lo) / width) as usize).min(bins - 1);
                per_bin[k].push(w);
            }
        }
        let counts: Vec<f64> = per_bin.into_iter().map(sum).collect();
        let normalization = sum(counts.iter().copied());
        Ok(Histogram {
            edges,
            counts,
            normalization,
            bandwidth: None,
        })
    }

    /// Gaussian KDE evaluated at `bins` centres, stored as bin masses.
    pub fn kde(x: &[f64], weights: Option<&[f64]>, lo: f64, hi: f64, bins: usize, bandwidth: Option<f64>) -> Result<Self> {
        let ones;
        let w = match weights {
            Some(w) => w,
            None => {
                ones = vec![1.0; x.len()];
                &ones
            }
        };
        let n_eff = effective_sample_size(w);
        if n_eff <= 0.0 {
            return Err(Error::Estimation("zero effective sample size".into()));
        }
        let h = bandwidth.unwrap_or_else(|| silverman(weighted_sd(x, w), n_eff, 1));
        let mut out = Histogram::new(&[], None, lo, hi, bins)?;
        let width = (hi - lo) / bins as f64;
        let sw = sum(w.iter().copied());
        for k in 0..bins {
            let c = lo + (k as f64 + 0.5) * width;
            let d = sum(x.iter().zip(w).map(|(v, wi)| wi * gauss_kernel((v - c) / h))) / (sw * h);
            out.counts[k] = d * width;
        }
        out.normalization = sum(out.counts.iter().copied());
        out.bandwidth = Some(h);
        Ok(out)
    }

    pub fn width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    pub fn centres(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// Normalized density per bin; its Riemann sum is 1.
    pub fn density(&self) -> Vec<f64> {
        let z = self.normalization * self.width();
        self.counts.iter().map(|c| if z > 0.0 { c / z } else { 0.0 }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        let v = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum(v), 2.0);
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a: Vec<f64> = (0..100).map(|k| k as f64).collect();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn ks_one_sample_uniform_grid() {
        let x: Vec<f64> = (0..1000).map(|k| (k as f64 + 0.5) / 1000.0).collect();
        let d = ks_one_sample(&x, |v| v.clamp(0.0, 1.0));
        assert!((d - 0.0005).abs() < 1e-12, "{d}");
    }

    #[test]
    fn histogram_normalizes() {
        let x: Vec<f64> = (0..977).map(|k| ((k * 37) % 101) as f64 / 101.0).collect();
        let h = Histogram::new(&x, None, 0.0, 1.0, 13).unwrap();
        let total: f64 = h.density().iter().sum::<f64>() * h.width();
        assert!((total - 1.0).abs() < 1e-12);
        let k = Histogram::kde(&x, None, -0.5, 1.5, 40, None).unwrap();
        let total: f64 = k.density().iter().sum::<f64>() * k.width();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_cdf_of_gaussian() {
        let c = TabulatedCdf::new(|x| Ok(gauss_kernel(x)), -9.0, 9.0, 360).unwrap();
        assert!((c.cdf(0.0) - 0.5).abs() < 1e-12);
        assert!((c.cdf(1.0) - 0.841344746068543).abs() < 1e-7);
        assert!((c.mass - 1.0).abs() < 1e-12);
    }
}
