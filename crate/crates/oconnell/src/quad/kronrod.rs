use super::{ErrorBounded, QuadratureSpec};
use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

// 15-point Kronrod extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

/// One G7–K15 panel: returns (Kronrod estimate, |K15 - G7|, integral of |f|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    let mut abs = fc.abs() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        k += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            g += WG[j / 2] * (f1 + f2);
        }
    }
    (k * h, ((k - g) * h).abs(), abs * h.abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive G7–K15 quadrature on `[a, b]`.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<ErrorBounded> {
    if a == b {
        return Ok(ErrorBounded::quadrature(0.0, 0.0));
    }
    let (v, e, mut abs_total) = gk15(&mut f, a, b);
    if !v.is_finite() {
        return Err(Error::Integration(format!("integrand not finite on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, err: e });
    let mut total = v;
    let mut err_total = e;
    loop {
        let roundoff = 50.0 * f64::EPSILON * abs_total;
        if spec.accepts(err_total, total) || err_total <= roundoff {
            return Ok(ErrorBounded::quadrature(total, err_total.max(roundoff)));
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::convergence("adaptive Gauss-Kronrod", total, err_total));
        }
        let p = heap.pop().expect("heap is never empty here");
        let m = 0.5 * (p.a + p.b);
        if m == p.a || m == p.b {
            return Err(Error::convergence("adaptive Gauss-Kronrod (interval too small)", total, err_total));
        }
        let (v1, e1, a1) = gk15(&mut f, p.a, m);
        let (v2, e2, a2) = gk15(&mut f, m, p.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Integration(format!("integrand not finite on [{}, {}]", p.a, p.b)));
        }
        total += v1 + v2 - p.value;
        err_total += e1 + e2 - p.err;
        abs_total += a1 + a2;
        heap.push(Panel { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, err: e2 });
        // Guard against drift in the running error sum.
        if heap.len() % 256 == 0 {
            err_total = heap.iter().map(|p| p.err).sum();
            total = heap.iter().map(|p| p.value).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact_in_one_panel() {
        let mut f = |x: f64| x.powi(10) - 3.0 * x.powi(3);
        let (v, _, _) = gk15(&mut f, -1.0, 2.0);
        let exact = (2f64.powi(11) + 1.0) / 11.0 - 0.75 * (16.0 - 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn oscillatory() {
        let s = QuadratureSpec::default();
        let r = gauss_kronrod(|x| (50.0 * x).sin() * x, 0.0, PI, &s).unwrap();
        let exact = -PI / 50.0;
        assert!((r.value - exact).abs() < 1e-12, "{} {}", r.value, exact);
    }

    #[test]
    fn kink() {
        let s = QuadratureSpec::default();
        let r = gauss_kronrod(|x| (x - 0.3).abs(), 0.0, 1.0, &s).unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn reversed_interval() {
        let s = QuadratureSpec::default();
        let r = gauss_kronrod(|x| x, 1.0, 0.0, &s).unwrap();
        assert!((r.value + 0.5).abs() < 1e-15);
    }
}
