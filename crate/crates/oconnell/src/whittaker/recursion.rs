use super::{givental_exponent, PsiValue, TriangularArray};
use crate::error::{Error, Result};
use crate::quad::{trapezoid_line, QuadratureSpec};
use crate::specfun::{bessel_k_scaled, Order};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::HashMap;

/// Margin added around each integration box: the factor
/// exp(-e^{-(t-a)} - e^{-(b-t)}) is below e^{-90} outside it.
const PAD: f64 = 4.5;
const MAX_LEVELS: usize = 9;
/// Terms whose log upper bound is this far below the largest bound are
/// dropped without evaluating the inner function.
const SLACK: f64 = 80.0;

/// `m * exp(e)`, for values that would overflow or underflow as f64.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub m: Complex64,
    pub e: f64,
}

impl Scaled {
    pub fn value(&self) -> Complex64 {
        if self.m == Complex64::new(0.0, 0.0) {
            self.m
        } else {
            self.m * self.e.exp()
        }
    }

    pub fn ln_abs(&self) -> f64 {
        self.m.norm().ln() + self.e
    }
}

fn rel_diff(a: Scaled, b: Scaled) -> f64 {
    let e = a.e.max(b.e);
    let x = a.m * (a.e - e).exp();
    let y = b.m * (b.e - e).exp();
    if y.norm() == 0.0 {
        if x.norm() == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (x - y).norm() / y.norm()
    }
}

fn log_g(t: f64, a: f64, b: f64) -> f64 {
    -(-(t - a)).exp() - (-(b - t)).exp()
}

/// First trapezoid step: resolves narrow peaks of crossed pairs and the
/// phase oscillation.
fn initial_step(x: &[f64], nu: &[f64]) -> f64 {
    let mut h: f64 = 0.5;
    for w in x.windows(2) {
        let crossing = (w[0] - w[1]).max(0.0);
        h = h.min(0.5 * (-crossing / 4.0).exp());
    }
    let spread = nu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    h.min(1.0 / (1.0 + 2.0 * spread))
}

/// ψ^{(2)} by the one-dimensional Givental integral over T_{1,1}.
pub(crate) fn psi2_givental(nu: &[f64], x: &[f64], spec: &QuadratureSpec) -> Result<PsiValue> {
    let (a, b) = (x[0], x[1]);
    let mid = 0.5 * (a + b);
    let peak = log_g(mid, a, b);
    let w = nu[0] - nu[1];
    let h0 = initial_step(x, nu);
    let inner = QuadratureSpec {
        abs_tol: spec.abs_tol * (-peak).exp().min(1e300),
        ..*spec
    };
    let re = trapezoid_line(|t| (log_g(t, a, b) - peak).exp() * (w * t).cos(), mid, h0, &inner)?;
    let im = trapezoid_line(|t| (log_g(t, a, b) - peak).exp() * (w * t).sin(), mid, h0, &inner)?;
    let scale = peak.exp();
    let v = Complex64::new(re.value, im.value) * Complex64::from_polar(scale, nu[1] * (a + b));
    Ok(PsiValue {
        value: v,
        error_bound: scale * (re.error_bound + im.error_bound),
    })
}

fn closed_form2(nu: &[f64], x: &[f64]) -> Result<(Scaled, f64)> {
    let z = 2.0 * (-(x[1] - x[0]) / 2.0).exp();
    let k = bessel_k_scaled(Order::Imaginary(nu[0] - nu[1]), z)?;
    let ph = 0.5 * (nu[0] + nu[1]) * (x[0] + x[1]);
    let rel = if k.mantissa == 0.0 {
        0.0
    } else {
        k.error / k.mantissa.abs()
    };
    Ok((
        Scaled {
            m: Complex64::from_polar(2.0 * k.mantissa, ph),
            e: k.exponent,
        },
        rel,
    ))
}

/// Integer gap indices of a lattice configuration, padded to a fixed size.
type Key = [i64; 4];

/// Nested trapezoid sums on the lattice hℤ shared by every row, so that
/// inner configurations (shifted to start at 0) have gaps on the lattice
/// and their values can be tabulated by gap indices.
struct Lattice<'a> {
    nu: &'a [f64],
    h: f64,
    // tables[m] holds ψ^{(m)} for the first m spectral components
    tables: Vec<HashMap<Key, Scaled>>,
}

/// Grid of the row below x: first lattice index and node count per entry.
fn row_grid(x: &[f64], h: f64) -> (Vec<i64>, Vec<usize>) {
    let m = x.len() - 1;
    let mut first = Vec::with_capacity(m);
    let mut cnt = Vec::with_capacity(m);
    for j in 0..m {
        let (a, b) = (x[j], x[j + 1]);
        let i0 = ((a.min(b) - PAD) / h).floor() as i64;
        let i1 = ((a.max(b) + PAD) / h).ceil() as i64;
        first.push(i0);
        cnt.push((i1 - i0 + 1) as usize);
    }
    (first, cnt)
}

fn key_of(gaps: &[i64]) -> Key {
    let mut key: Key = [0; 4];
    key[..gaps.len()].copy_from_slice(gaps);
    key
}

impl Lattice<'_> {
    fn new(nu: &[f64], h: f64) -> Lattice<'_> {
        Lattice {
            nu,
            h,
            tables: vec![HashMap::new(); nu.len() + 1],
        }
    }

    /// (0, k₁h, (k₁+k₂)h, ...) for gap indices k.
    fn config(&self, gaps: &[i64]) -> Vec<f64> {
        let mut y = vec![0.0; gaps.len() + 1];
        let mut acc = 0i64;
        for (j, g) in gaps.iter().enumerate() {
            acc += g;
            y[j + 1] = acc as f64 * self.h;
        }
        y
    }

    fn compute(&self, m: usize, gaps: &[i64]) -> Result<Scaled> {
        let y = self.config(gaps);
        if m == 2 {
            Ok(closed_form2(&self.nu[..2], &y)?.0)
        } else {
            self.sum(m, &y)
        }
    }

    /// ψ^{(m)} at the configuration with gap indices `gaps`.
    fn value(&self, m: usize, gaps: &[i64]) -> Result<Scaled> {
        match self.tables[m].get(&key_of(gaps)) {
            Some(v) => Ok(*v),
            None => self.compute(m, gaps),
        }
    }

    /// Visits the retained grid points of the row below x, passing the
    /// gap indices of the row, its log-weight and its lattice indices.
    fn visit<F: FnMut(&[i64], f64, &[i64]) -> Result<()>>(&self, x: &[f64], mut f: F) -> Result<()> {
        let m = x.len() - 1;
        let h = self.h;
        let (first, cnt) = row_grid(x, h);
        let lw: Vec<Vec<f64>> = (0..m)
            .map(|j| {
                (0..cnt[j])
                    .map(|i| log_g((first[j] + i as i64) as f64 * h, x[j], x[j + 1]))
                    .collect()
            })
            .collect();
        // |ψ^{(m)}(t)| ≤ ψ₀^{(m)}(t), which is exp(-2e^{-g/2}) small at each
        // crossed gap g up to polynomial factors
        let gap = |idx: &[usize], j: usize| first[j + 1] + idx[j + 1] as i64 - first[j] - idx[j] as i64;
        let bound = |idx: &[usize]| {
            let mut b = 0.0;
            for j in 0..m {
                b += lw[j][idx[j]];
            }
            for j in 0..m - 1 {
                b -= 2.0 * (-0.5 * gap(idx, j) as f64 * h).exp();
            }
            b
        };
        let step = |idx: &mut [usize]| {
            for j in 0..m {
                idx[j] += 1;
                if idx[j] < cnt[j] {
                    return true;
                }
                idx[j] = 0;
            }
            false
        };
        let mut idx = vec![0usize; m];
        let mut best = f64::NEG_INFINITY;
        loop {
            best = best.max(bound(&idx));
            if !step(&mut idx) {
                break;
            }
        }
        let mut gaps = vec![0i64; m - 1];
        let mut pos = vec![0i64; m];
        loop {
            if bound(&idx) > best - SLACK {
                let mut w = 0.0;
                for j in 0..m {
                    w += lw[j][idx[j]];
                    pos[j] = first[j] + idx[j] as i64;
                }
                for (j, g) in gaps.iter_mut().enumerate() {
                    *g = gap(&idx, j);
                }
                f(&gaps, w, &pos)?;
            }
            if !step(&mut idx) {
                break;
            }
        }
        Ok(())
    }

    /// Tabulates ψ^{(m)} at the given gap indices, inner levels first.
    fn fill(&mut self, m: usize, keys: Vec<Key>) -> Result<()> {
        let mut keys: Vec<Key> = keys
            .into_iter()
            .filter(|k| !self.tables[m].contains_key(k))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        if keys.is_empty() {
            return Ok(());
        }
        if m >= 3 {
            let mut below = std::collections::HashSet::new();
            if m == 3 {
                // every pair gap inside the boxes, as one range
                let (mut lo, mut hi) = (i64::MAX, i64::MIN);
                for k in &keys {
                    let y = self.config(&k[..m - 1]);
                    let (first, cnt) = row_grid(&y, self.h);
                    lo = lo.min(first[1] - first[0] - cnt[0] as i64);
                    hi = hi.max(first[1] + cnt[1] as i64 - first[0]);
                }
                below.extend((lo..=hi).map(|g| key_of(&[g])));
            } else {
                for k in &keys {
                    let y = self.config(&k[..m - 1]);
                    self.visit(&y, |g, _, _| {
                        below.insert(key_of(g));
                        Ok(())
                    })?;
                }
            }
            self.fill(m - 1, below.into_iter().collect())?;
        }
        let this = &*self;
        let vals: Vec<(Key, Scaled)> = keys
            .par_iter()
            .map(|k| Ok((*k, this.compute(m, &k[..m - 1])?)))
            .collect::<Result<_>>()?;
        self.tables[m].extend(vals);
        Ok(())
    }

    /// Trapezoid sum for ψ^{(n)}(x) over the row below x.
    fn sum(&self, n: usize, x: &[f64]) -> Result<Scaled> {
        let m = n - 1;
        let h = self.h;
        let sub_sum: f64 = self.nu[..m].iter().sum();
        let nu_n = self.nu[m];
        let sx: f64 = x.iter().sum();
        let mut terms: Vec<(f64, Complex64)> = Vec::new();
        self.visit(x, |gaps, w, pos| {
            let v = self.value(m, gaps)?;
            if v.m != Complex64::new(0.0, 0.0) {
                let st = pos.iter().sum::<i64>() as f64 * h;
                let phase = nu_n * (sx - st) + pos[0] as f64 * h * sub_sum;
                terms.push((w + v.e, v.m * Complex64::from_polar(1.0, phase)));
            }
            Ok(())
        })?;
        let top = terms
            .iter()
            .map(|(l, c)| l + c.norm().ln())
            .fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Ok(Scaled {
                m: Complex64::new(0.0, 0.0),
                e: 0.0,
            });
        }
        let mut s = Complex64::new(0.0, 0.0);
        for (l, c) in &terms {
            s += c * (l - top).exp();
        }
        Ok(Scaled {
            m: s * h.powi(m as i32),
            e: top,
        })
    }

    /// ψ^{(n)}(x) at this step, tabulating inner values first.
    fn top(&mut self, x: &[f64]) -> Result<Scaled> {
        let n = x.len();
        let mut keys = Vec::new();
        self.visit(x, |g, _, _| {
            keys.push(key_of(g));
            Ok(())
        })?;
        self.fill(n - 1, keys)?;
        self.sum(n, x)
    }
}

/// ψ^{(N)}_{iν}(x) by nested integration over rows, with the N = 2 closed
/// form at the bottom of the recursion. Returns the value and an estimate
/// of its relative error.
///
/// The trapezoid error decays like e^{-c/h}, so once two levels differ by
/// δ the finer one is good to about δ².
pub(crate) fn psi_recursive(nu: &[f64], x: &[f64], rel_tol: f64) -> Result<(Scaled, f64)> {
    match x.len() {
        1 => Ok((
            Scaled {
                m: Complex64::from_polar(1.0, nu[0] * x[0]),
                e: 0.0,
            },
            0.0,
        )),
        2 => closed_form2(nu, x),
        n if n <= 5 => {
            let mut h = initial_step(x, nu);
            let mut prev = Lattice::new(nu, h).top(x)?;
            let mut diff = f64::INFINITY;
            for _ in 0..MAX_LEVELS {
                h *= 0.5;
                let cur = Lattice::new(nu, h).top(x)?;
                diff = rel_diff(prev, cur);
                let err = if diff <= 1e-4 { diff * diff } else { diff };
                if err <= rel_tol {
                    return Ok((cur, err.max(f64::EPSILON)));
                }
                prev = cur;
            }
            Err(Error::convergence("row-by-row Givental recursion", prev.value().re, diff))
        }
        n => Err(Error::Capability(format!("recursion supports N <= 5, got {n}"))),
    }
}

/// ψ^{(N)}_{iν}(x) for N ≤ 3 by a tensor trapezoid rule over every free
/// entry of the triangular array at once. Slow; used to cross-check the
/// recursive evaluation.
pub fn psi_direct(nu: &[f64], x: &[f64], rel_tol: f64) -> Result<Complex64> {
    let n = x.len();
    if n == 0 || n > 3 || nu.len() != n {
        return Err(Error::Capability("direct evaluation supports 1 <= N <= 3".into()));
    }
    if n == 1 {
        return Ok(Complex64::from_polar(1.0, nu[0] * x[0]));
    }
    // boxes for free entries, listed top row first
    let mut boxes: Vec<(f64, f64)> = Vec::new();
    let mut row_boxes: Vec<(f64, f64)> = x.iter().map(|&v| (v, v)).collect();
    let mut rows: Vec<Vec<(f64, f64)>> = Vec::new();
    for _k in (1..n).rev() {
        let next: Vec<(f64, f64)> = row_boxes
            .windows(2)
            .map(|w| (w[0].0.min(w[1].0) - PAD, w[0].1.max(w[1].1) + PAD))
            .collect();
        rows.push(next.clone());
        row_boxes = next;
    }
    for r in rows.iter().rev() {
        boxes.extend_from_slice(r);
    }
    let dim = boxes.len();
    let mut arr = TriangularArray::anchored(x, &vec![0.0; dim])?;
    let sum = |h: f64, arr: &mut TriangularArray| -> Result<Complex64> {
        let cnt: Vec<usize> = boxes.iter().map(|(a, b)| ((b - a) / h).ceil() as usize + 1).collect();
        let mut idx = vec![0usize; dim];
        let mut free = vec![0.0; dim];
        let mut s = Complex64::new(0.0, 0.0);
        'outer: loop {
            for j in 0..dim {
                free[j] = boxes[j].0 + idx[j] as f64 * h;
            }
            arr.set_free(&free);
            s += givental_exponent(nu, arr)?.exp();
            for j in 0..dim {
                idx[j] += 1;
                if idx[j] < cnt[j] {
                    continue 'outer;
                }
                idx[j] = 0;
            }
            break;
        }
        Ok(s * h.powi(dim as i32))
    };
    let mut h = initial_step(x, nu);
    let mut prev = sum(h, &mut arr)?;
    for _ in 0..MAX_LEVELS {
        h *= 0.5;
        let cur = sum(h, &mut arr)?;
        if (cur - prev).norm() <= rel_tol * cur.norm() {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::convergence("direct Givental quadrature", prev.re, f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recursive_matches_direct_n3() {
        let x = [0.0, 2.0, 4.0];
        let (r, _) = psi_recursive(&[0.0; 3], &x, 1e-12).unwrap();
        let d = psi_direct(&[0.0; 3], &x, 1e-10).unwrap();
        let rv = r.value();
        assert!((rv - d).norm() < 1e-8 * d.norm(), "{rv} {d}");
        let nu = [0.4, -0.3, 0.1];
        let (r, _) = psi_recursive(&nu, &[0.0, 1.0, 1.5], 1e-12).unwrap();
        let d = psi_direct(&nu, &[0.0, 1.0, 1.5], 1e-10).unwrap();
        assert!((r.value() - d).norm() < 1e-8 * d.norm(), "{} {d}", r.value());
    }

    #[test]
    fn crossed_configuration_stays_finite_in_log() {
        let (s, _) = psi_recursive(&[0.0; 3], &[0.0, -12.0, -6.0], 1e-10).unwrap();
        assert!(s.ln_abs().is_finite());
        assert!(s.ln_abs() < -100.0);
    }

    #[test]
    fn givental_n2_handles_crossing() {
        let s = QuadratureSpec::default();
        let p = psi2_givental(&[0.0, 0.0], &[3.0, -3.0], &s).unwrap();
        let (c, _) = closed_form2(&[0.0, 0.0], &[3.0, -3.0]).unwrap();
        assert!((p.value - c.value()).norm() < 1e-10 * c.value().norm());
    }
}
