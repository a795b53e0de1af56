use super::{ErrorBounded, QuadratureSpec, Truncation};
use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

/// Nodes below this fraction of the largest |f| seen count as tail.
const NEGLIGIBLE: f64 = 1e-18;
/// Consecutive tail nodes needed before a walk stops.
const TAIL_RUN: usize = 6;
const MAX_NODES: usize = 20_000_000;

struct Walker {
    peak: f64,
    abs_sum: f64,
    nodes: usize,
    bounds: Option<(f64, f64)>,
    // furthest node reached on each side; later passes never stop short of it
    reach: [f64; 2],
}

impl Walker {
    fn new(spec: &QuadratureSpec) -> Self {
        let bounds = match spec.truncation {
            Truncation::Auto => None,
            Truncation::Explicit(lo, hi) => Some((lo, hi)),
        };
        Walker {
            peak: 0.0,
            abs_sum: 0.0,
            nodes: 0,
            bounds,
            reach: [0.0; 2],
        }
    }

    fn eval<F: FnMut(f64) -> f64>(&mut self, f: &mut F, x: f64) -> Result<f64> {
        let v = f(x);
        self.nodes += 1;
        if !v.is_finite() {
            return Err(Error::Integration(format!("integrand is not finite at {x}")));
        }
        let a = v.abs();
        if a > self.peak {
            self.peak = a;
        }
        self.abs_sum += a;
        Ok(v)
    }

    /// Sums f(start + k step) for k = 0, 1, ... until the tail is negligible.
    fn side<F: FnMut(f64) -> f64>(&mut self, f: &mut F, start: f64, step: f64) -> Result<f64> {
        let dir = usize::from(step < 0.0);
        let reach = self.reach[dir];
        let mut sum = 0.0;
        let mut run = 0;
        let mut k = 0usize;
        loop {
            let x = start + k as f64 * step;
            if let Some((lo, hi)) = self.bounds {
                if x < lo || x > hi {
                    return Ok(sum);
                }
            }
            let v = self.eval(f, x)?;
            sum += v;
            let dist = (k as f64 + 0.5) * step.abs();
            self.reach[dir] = self.reach[dir].max(dist);
            if v.abs() <= NEGLIGIBLE * self.peak {
                run += 1;
            } else {
                run = 0;
            }
            k += 1;
            if (run >= TAIL_RUN && dist > reach) || (self.peak == 0.0 && k > 400) {
                return Ok(sum);
            }
            if self.nodes > MAX_NODES {
                return Err(Error::Integration(format!(
                    "trapezoid walk exceeded {MAX_NODES} nodes"
                )));
            }
        }
    }
}

fn finish(
    spec: &QuadratureSpec,
    walker: &Walker,
    h: f64,
    est: f64,
    err: f64,
    level: u32,
    min_levels: u32,
) -> Option<ErrorBounded> {
    let roundoff = 64.0 * f64::EPSILON * h * walker.abs_sum;
    if level >= min_levels && (spec.accepts(err, est) || err <= roundoff) {
        Some(ErrorBounded::quadrature(est, err.max(roundoff)))
    } else {
        None
    }
}

/// Trapezoid rule over the whole real line with nodes at `origin + k h`.
///
/// `f` must decay in both directions. The step starts at `h0` and is halved
/// until two successive sums agree.
pub fn trapezoid_line<F: FnMut(f64) -> f64>(
    mut f: F,
    origin: f64,
    h0: f64,
    spec: &QuadratureSpec,
) -> Result<ErrorBounded> {
    assert!(h0 > 0.0);
    let mut w = Walker::new(spec);
    let mut total = w.eval(&mut f, origin)?;
    total += w.side(&mut f, origin + h0, h0)?;
    total += w.side(&mut f, origin - h0, -h0)?;
    let mut h = h0;
    let mut est = h * total;
    let mut err = f64::INFINITY;
    for level in 1..=spec.max_refinements {
        let mid = w.side(&mut f, origin + 0.5 * h, h)? + w.side(&mut f, origin - 0.5 * h, -h)?;
        let next = 0.5 * est + 0.5 * h * mid;
        err = (next - est).abs();
        h *= 0.5;
        est = next;
        if let Some(r) = finish(spec, &w, h, est, err, level, 2) {
            return Ok(r);
        }
    }
    Err(Error::convergence("trapezoid rule", est, err))
}

/// Integral over `[0, inf)` of an even function, by the trapezoid rule on
/// the symmetric line.
pub fn trapezoid_even<F: FnMut(f64) -> f64>(
    mut f: F,
    h0: f64,
    spec: &QuadratureSpec,
) -> Result<ErrorBounded> {
    assert!(h0 > 0.0);
    let mut w = Walker::new(spec);
    let mut total = 0.5 * w.eval(&mut f, 0.0)?;
    total += w.side(&mut f, h0, h0)?;
    let mut h = h0;
    let mut est = h * total;
    let mut err = f64::INFINITY;
    for level in 1..=spec.max_refinements {
        let mid = w.side(&mut f, 0.5 * h, h)?;
        let next = 0.5 * est + 0.5 * h * mid;
        err = (next - est).abs();
        h *= 0.5;
        est = next;
        if let Some(r) = finish(spec, &w, h, est, err, level, 2) {
            return Ok(r);
        }
    }
    Err(Error::convergence("trapezoid rule", est, err))
}

/// Tanh–sinh rule on a finite interval. Endpoint singularities are fine as
/// long as they are integrable.
pub fn tanh_sinh<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<ErrorBounded> {
    if a == b {
        return Ok(ErrorBounded::quadrature(0.0, 0.0));
    }
    let d = 0.5 * (b - a);
    let g = |s: f64| {
        let u = FRAC_PI_2 * s.sinh();
        // distance to the nearer endpoint, computed without cancellation
        let e = (-2.0 * u.abs()).exp();
        let gap = d * 2.0 * e / (1.0 + e);
        let x = if u < 0.0 { a + gap } else { b - gap };
        if gap == 0.0 || x == a || x == b {
            return 0.0;
        }
        let ch = u.cosh();
        let w = d * FRAC_PI_2 * s.cosh() / (ch * ch);
        if w == 0.0 {
            0.0
        } else {
            f(x) * w
        }
    };
    let inner = QuadratureSpec {
        truncation: Truncation::Auto,
        ..*spec
    };
    trapezoid_line(g, 0.0, 0.5, &inner)
}

/// Exp–sinh rule on `[a, inf)` for integrands decaying at least exponentially.
pub fn exp_sinh<F: FnMut(f64) -> f64>(mut f: F, a: f64, spec: &QuadratureSpec) -> Result<ErrorBounded> {
    let g = |s: f64| {
        let e = (FRAC_PI_2 * s.sinh()).exp();
        let x = a + e;
        if !x.is_finite() || x == a {
            return 0.0;
        }
        let v = f(x);
        if v == 0.0 {
            0.0
        } else {
            v * FRAC_PI_2 * s.cosh() * e
        }
    };
    let inner = QuadratureSpec {
        truncation: Truncation::Auto,
        ..*spec
    };
    trapezoid_line(g, 0.0, 0.5, &inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_on_line() {
        let s = QuadratureSpec::default();
        let r = trapezoid_line(|x| (-x * x).exp(), 0.3, 1.0, &s).unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-14);
        assert!(r.error_bound < 1e-12);
    }

    #[test]
    fn even_half_line() {
        // int_0^inf exp(-cosh t) dt = K_0(1)
        let s = QuadratureSpec::default();
        let r = trapezoid_even(|t| (-t.cosh()).exp(), 0.5, &s).unwrap();
        assert!((r.value - 0.421_024_438_240_708_3).abs() < 1e-15);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        let s = QuadratureSpec::default();
        let r = tanh_sinh(|x| 1.0 / x.sqrt(), 0.0, 1.0, &s).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12, "{}", r.value);
        let r = tanh_sinh(|x| x.ln(), 0.0, 1.0, &s).unwrap();
        assert!((r.value + 1.0).abs() < 1e-12);
        let r = tanh_sinh(|x| x * x, 2.0, -1.0, &s).unwrap();
        assert!((r.value + 3.0).abs() < 1e-12);
    }

    #[test]
    fn exp_sinh_half_line() {
        let s = QuadratureSpec::default();
        let r = exp_sinh(|x| (-x).exp() * x.powf(-0.5), 0.0, &s).unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-11, "{}", r.value);
        let r = exp_sinh(|x| 1.0 / (1.0 + x * x), 1.0, &s);
        // algebraic decay still converges, just slowly
        if let Ok(r) = r {
            assert!((r.value - PI / 4.0).abs() < 1e-8);
        }
    }

    #[test]
    fn explicit_truncation_cuts_range() {
        let s = QuadratureSpec {
            truncation: Truncation::Explicit(-10.0, 10.0),
            ..Default::default()
        };
        // the constant shelf outside [-10, 10] must never be visited
        let f = |x: f64| (-x * x).exp() + if x.abs() > 10.0 { 1.0 } else { 0.0 };
        let r = trapezoid_line(f, 0.0, 0.5, &s).unwrap();
        assert!((r.value - PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn non_finite_integrand_is_an_error() {
        let s = QuadratureSpec::default();
        assert!(trapezoid_line(|x| 1.0 / x, 0.0, 0.5, &s).is_err());
    }
}
