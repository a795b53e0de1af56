use super::{check_args, givental_exponent, TriangularArray};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const CHUNK: usize = 4096;

/// Monte Carlo estimate of ψ with standard errors of the real and
/// imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEstimate {
    pub value: Complex64,
    pub std_error_re: f64,
    pub std_error_im: f64,
    pub samples: usize,
}

impl PsiEstimate {
    pub fn std_error(&self) -> f64 {
        self.std_error_re.hypot(self.std_error_im)
    }
}

fn ln_sigmoid(z: f64) -> f64 {
    if z > 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// log density of U + L, U uniform on [lo, hi] and L standard logistic.
fn ln_proposal(t: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let a = t - lo;
    if w < 1e-8 {
        return ln_sigmoid(a) + ln_sigmoid(-a);
    }
    let b = t - hi;
    ln_sigmoid(a) + ln_sigmoid(-b) + (-(-w).exp_m1()).ln() - w.ln()
}

/// One weighted draw: (log |weight|, phase). Entries are drawn row by row
/// upwards, each between its two neighbours in the row below.
fn draw(nu: &[f64], x: &[f64], rng: &mut ChaCha8Rng, arr: &mut TriangularArray, free: &mut [f64]) -> Result<(f64, f64)> {
    let n = x.len();
    let mut below: Vec<f64> = x.to_vec();
    let mut ln_q = 0.0;
    for k in (1..n).rev() {
        let start = k * (k - 1) / 2;
        let mut row = Vec::with_capacity(k);
        for j in 0..k {
            let (lo, hi) = (below[j].min(below[j + 1]), below[j].max(below[j + 1]));
            let u: f64 = rng.random();
            let p: f64 = rng.random_range(f64::EPSILON..1.0);
            let t = lo + u * (hi - lo) + (p / (1.0 - p)).ln();
            ln_q += ln_proposal(t, lo, hi);
            row.push(t);
        }
        free[start..start + k].copy_from_slice(&row);
        below = row;
    }
    arr.set_free(free);
    let f = givental_exponent(nu, arr)?;
    Ok((f.re - ln_q, f.im))
}

/// ψ^{(N)}_{iν}(x), N ≤ 5, by sequential importance sampling of the
/// triangular array. Samples are drawn in fixed chunks with one RNG stream
/// per chunk, so the result does not depend on the thread count.
pub fn psi_mc(nu: &[f64], x: &[f64], samples: usize, seed: u64) -> Result<PsiEstimate> {
    check_args(nu, x)?;
    let n = x.len();
    if n > 5 {
        return Err(Error::Capability(format!("Monte Carlo psi supports N <= 5, got {n}")));
    }
    if samples < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    if n == 1 {
        return Ok(PsiEstimate {
            value: Complex64::from_polar(1.0, nu[0] * x[0]),
            std_error_re: 0.0,
            std_error_im: 0.0,
            samples,
        });
    }
    let chunks = samples.div_ceil(CHUNK);
    let draws: Vec<Vec<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let m = n * (n - 1) / 2;
            let mut free = vec![0.0; m];
            let mut arr = TriangularArray::anchored(x, &free)?;
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).map(|_| draw(nu, x, &mut rng, &mut arr, &mut free)).collect()
        })
        .collect::<Result<_>>()?;
    let top = draws
        .iter()
        .flatten()
        .map(|d| d.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut sr, mut si, mut qr, mut qi) = (0.0, 0.0, 0.0, 0.0);
    for &(l, ph) in draws.iter().flatten() {
        let w = (l - top).exp();
        let (re, im) = (w * ph.cos(), w * ph.sin());
        sr += re;
        si += im;
        qr += re * re;
        qi += im * im;
    }
    let k = samples as f64;
    let (mr, mi) = (sr / k, si / k);
    let se = |q: f64, m: f64| ((q / k - m * m).max(0.0) / (k - 1.0)).sqrt();
    let scale = top.exp();
    if !scale.is_finite() {
        return Err(Error::domain("psi estimate overflows"));
    }
    Ok(PsiEstimate {
        value: Complex64::new(mr, mi) * scale,
        std_error_re: se(qr, mr) * scale,
        std_error_im: se(qi, mi) * scale,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proposal_density_normalized() {
        let (lo, hi) = (-0.3, 1.7);
        let h = 0.01;
        let s: f64 = (-4000..4000).map(|i| ln_proposal(i as f64 * h, lo, hi).exp() * h).sum();
        assert!((s - 1.0).abs() < 1e-9, "{s}");
        let s: f64 = (-4000..4000).map(|i| ln_proposal(i as f64 * h, 0.5, 0.5).exp() * h).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mc_matches_closed_form_n2() {
        let est = psi_mc(&[0.0, 0.0], &[0.0, 2.0], 100_000, 7).unwrap();
        let want = 2.0 * crate::specfun::bessel_k(crate::specfun::Order::Real(0.0), 2.0 * (-1f64).exp())
            .unwrap()
            .value;
        assert!((est.value.re - want).abs() < 4.0 * est.std_error_re + 1e-12, "{est:?} {want}");
        assert!(est.std_error_re < 1e-2 * want);
    }

    #[test]
    fn mc_matches_recursion_n3() {
        let x = [0.0, 1.0, 2.5];
        let nu = [0.3, 0.0, -0.2];
        let est = psi_mc(&nu, &x, 200_000, 11).unwrap();
        let (r, _) = super::super::recursion::psi_recursive(&nu, &x, 1e-10).unwrap();
        let r = r.value();
        assert!((est.value.re - r.re).abs() < 4.0 * est.std_error_re, "{est:?} {r}");
        assert!((est.value.im - r.im).abs() < 4.0 * est.std_error_im, "{est:?} {r}");
    }

    #[test]
    fn mc_is_reproducible() {
        let a = psi_mc(&[0.0; 4], &[0.0, 1.0, 2.0, 3.0], 10_000, 3).unwrap();
        let b = psi_mc(&[0.0; 4], &[0.0, 1.0, 2.0, 3.0], 10_000, 3).unwrap();
        assert_eq!(a, b);
    }
}
