use super::DensityEstimate;
use crate::error::{check_finite, check_positive, Error, Result};
use crate::quad::{gauss_kronrod, trapezoid_even, trapezoid_line, ErrorBounded, QuadratureSpec, WynnEpsilon};
use crate::specfun::{bessel_j0, bessel_k, bessel_k_scaled, gamma, ln_abs_gamma_complex, Order};
use std::cell::RefCell;
use std::f64::consts::PI;

/// J₀ argument where the u-integral hands over to the z-substituted tail.
const Z_SWITCH: f64 = 9.75 * PI;
const MAX_PANELS: usize = 4000;

/// Collects the first error raised inside an integrand closure.
#[derive(Default)]
pub(crate) struct Failure(RefCell<Option<Error>>);

impl Failure {
    pub(crate) fn catch(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    }

    pub(crate) fn check(&self) -> Result<()> {
        match self.0.borrow_mut().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// ∫_{u₀}^∞ u J₀(√(A cosh u - B)) e^{-(u² - u₀²)/2t} du with A cosh u₀ = B,
/// or without the Gaussian when `t` is None.
///
/// Up to J₀ argument [`Z_SWITCH`] the integral is taken in u. Beyond that
/// the variable is z = √(A cosh u - B), the range is cut into half-periods
/// of J₀ and the alternating panel sums are accelerated with Wynn's ε.
fn kk_integral(a: f64, b: f64, u0: f64, t: Option<f64>, spec: &QuadratureSpec) -> Result<ErrorBounded> {
    let gauss = |u: f64| match t {
        Some(t) => (-(u - u0) * (u + u0) / (2.0 * t)).exp(),
        None => 1.0,
    };
    // w = A(cosh u - cosh u₀) without cancellation
    let w = |u: f64| 2.0 * a * (0.5 * (u + u0)).sinh() * (0.5 * (u - u0)).sinh();
    let u_gauss = t.map(|t| (u0 * u0 + 92.0 * t).sqrt());
    let c_switch = (Z_SWITCH * Z_SWITCH + b) / a;
    let u_switch = if c_switch.is_finite() { c_switch.acosh().max(u0) } else { f64::INFINITY };
    let u_end = match u_gauss {
        Some(g) => g.min(u_switch),
        None => u_switch,
    };
    let fail = Failure::default();
    let head = gauss_kronrod(
        |u| {
            let j = fail.catch(bessel_j0(w(u).max(0.0).sqrt()).map(|j| j.value));
            u * j * gauss(u)
        },
        u0,
        u_end,
        spec,
    )?;
    fail.check()?;
    if u_end < u_switch {
        return Ok(head);
    }

    // tail in z
    let u_of = |z: f64| ((z * z + b) / a).acosh();
    let fail = Failure::default();
    let tail = |z: f64| {
        let c = (z * z + b) / a;
        let u = c.acosh();
        let sh = ((c - 1.0) * (c + 1.0)).sqrt();
        let j = fail.catch(bessel_j0(z).map(|j| j.value));
        u * j * gauss(u) * 2.0 * z / (a * sh)
    };
    let panel_spec = QuadratureSpec {
        abs_tol: spec.abs_tol * 1e-3,
        ..*spec
    };
    let mut wynn = WynnEpsilon::new();
    let mut partial = head.value;
    let mut err = head.error_bound;
    let mut settled = 0;
    let mut scale = head.value.abs();
    let mut z = Z_SWITCH;
    for k in 0..MAX_PANELS {
        let p = gauss_kronrod(tail, z, z + PI, &panel_spec)?;
        partial += p.value;
        err += p.error_bound;
        z += PI;
        scale = scale.max(partial.abs());
        let est = wynn.push(partial);
        if let Some(g) = u_gauss {
            if u_of(z) > g {
                fail.check()?;
                return Ok(ErrorBounded::quadrature(partial, err));
            }
        }
        // a result far below the partial sums is cancellation noise
        let floor = 1e-14 * scale;
        if k >= 6 && wynn.change() <= spec.tolerance(est).max(floor) {
            settled += 1;
            if settled >= 3 {
                fail.check()?;
                return Ok(ErrorBounded::quadrature(est, err + wynn.change()));
            }
        } else {
            settled = 0;
        }
    }
    Err(Error::convergence("oscillatory J0 tail", wynn.estimate(), wynn.change()))
}

/// `scale` is the size of the integrand's contributions before cancellation.
fn kk_spec(scale: f64) -> QuadratureSpec {
    QuadratureSpec::new(1e-15 * scale, 1e-11)
}

/// Q⁰(t, y|x) without drift, from the single real integral
/// (√(2π) t^{3/2})^{-1} ∫_{x-y}^∞ u J₀(√(2e^{-(x+y)} cosh u - e^{-2x} - e^{-2y})) e^{-u²/2t} du.
///
/// The u-integrand is odd, so the range starts at |x - y| where the square
/// root argument vanishes; it is nonnegative beyond. Without killing the
/// integral is t; when killing takes it many decades below that the result
/// is a small difference of O(t) terms and, if `relative` accuracy is
/// asked for, the spectral form is used instead.
fn my_q0(t: f64, y: f64, x: f64, relative: bool) -> Result<ErrorBounded> {
    let u0 = (x - y).abs();
    let a = 2.0 * (-(x + y)).exp();
    let b = (-2.0 * x).exp() + (-2.0 * y).exp();
    if !a.is_finite() || !b.is_finite() || a == 0.0 {
        // far outside the reach of the potential or deep inside it
        return if x + y > 0.0 {
            let p = (-u0 * u0 / (2.0 * t)).exp() / (2.0 * PI * t).sqrt();
            Ok(ErrorBounded::quadrature(p, 1e-15 * p))
        } else {
            Ok(ErrorBounded::quadrature(0.0, 0.0))
        };
    }
    let i = match kk_integral(a, b, u0, Some(t), &kk_spec(t)) {
        Ok(i) if !relative || i.value >= 1e-7 * t => i,
        _ => return my_q0_spectral(t, y, x),
    };
    let c = (-u0 * u0 / (2.0 * t)).exp() / ((2.0 * PI).sqrt() * t.powf(1.5));
    Ok(i.scale(c))
}

/// Q^μ(t, y|x) for one Brownian particle with drift -μ killed at rate
/// e^{-2x}/2.
pub fn my_q(t: f64, y: f64, x: f64, mu: f64) -> Result<DensityEstimate> {
    check_positive("t", t)?;
    check_finite("y", y)?;
    check_finite("x", x)?;
    check_finite("mu", mu)?;
    let q = my_q0(t, y, x, true)?;
    let pre = (-mu * mu * t / 2.0 + mu * (x - y)).exp();
    Ok(DensityEstimate::quadrature(q.value * pre, q.error_bound * pre))
}

/// Q⁰(t, y|x) from the spectral form
/// (2/π²) ∫₀^∞ e^{-ν²t/2} K_{iν}(e^{-x}) K_{iν}(e^{-y}) ν sinh(πν) dν.
fn my_q0_spectral(t: f64, y: f64, x: f64) -> Result<ErrorBounded> {
    let (ra, rb) = ((-x).exp(), (-y).exp());
    let fail = Failure::default();
    let f = |nu: f64| {
        if nu == 0.0 {
            return 0.0;
        }
        let nu = nu.abs();
        let r = bessel_k_scaled(Order::Imaginary(nu), ra).and_then(|ka| {
            let kb = bessel_k_scaled(Order::Imaginary(nu), rb)?;
            let ln_sinh = PI * nu + (0.5 * (-(-2.0 * PI * nu).exp_m1())).ln();
            let l = -nu * nu * t / 2.0 + ka.exponent + kb.exponent + nu.ln() + ln_sinh;
            Ok(ka.mantissa * kb.mantissa * l.exp())
        });
        fail.catch(r)
    };
    // K_{iν}(r) oscillates in ν with frequency about log(2/r), only for r < 2
    let h0 = (0.5 / t.sqrt()).min(1.0 / (1.0 + x.max(0.0) + y.max(0.0)));
    let spec = QuadratureSpec::new(1e-300, 1e-11);
    let r = trapezoid_even(f, h0, &spec)?;
    fail.check()?;
    Ok(r.scale(2.0 / (PI * PI)))
}

/// Q^μ(t, y|x) from the spectral form
/// (2/π²) ∫₀^∞ e^{-ν²t/2} K_{iν}(e^{-x}) K_{iν}(e^{-y}) ν sinh(πν) dν.
pub fn my_q_spectral(t: f64, y: f64, x: f64, mu: f64) -> Result<DensityEstimate> {
    check_positive("t", t)?;
    check_finite("y", y)?;
    check_finite("x", x)?;
    check_finite("mu", mu)?;
    let r = my_q0_spectral(t, y, x)?;
    let pre = (-mu * mu * t / 2.0 + mu * (x - y)).exp();
    Ok(DensityEstimate::quadrature(r.value * pre, r.error_bound * pre))
}

/// Integral over y of `f`, over a range found by walking out from `center`
/// in steps of `step` until |f| is below 1e-14 of the largest value seen.
pub(crate) fn integrate_line<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    center: f64,
    step: f64,
    spec: &QuadratureSpec,
) -> Result<ErrorBounded> {
    let mut peak = f(center)?.abs();
    let mut ends = [center, center];
    for (side, dir) in [(0, -1.0), (1, 1.0)] {
        let mut y = center;
        let mut quiet = 0;
        for _ in 0..10_000 {
            y += dir * step;
            let v = f(y)?.abs();
            peak = peak.max(v);
            if v <= 1e-14 * peak {
                quiet += 1;
                if quiet >= 2 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        ends[side] = y;
    }
    // absolute accuracy relative to the size of the integral, not to noise
    // in the tails
    let spec = QuadratureSpec {
        abs_tol: spec.abs_tol.max(1e-12 * peak * (ends[1] - ends[0])),
        ..*spec
    };
    let fail = Failure::default();
    let r = gauss_kronrod(|y| fail.catch(f(y)), ends[0], ends[1], &spec)?;
    fail.check()?;
    Ok(r)
}

/// Survival probability 𝒩^μ(T, x) = ∫ Q^μ(T, y|x) dy.
///
/// For μ ≥ 0 and T not too small the y-integral is done in closed form
/// under the spectral integral ([`my_survival_spectral`]). Otherwise Q^μ is
/// integrated over a y-range grown until the integrand is negligible.
pub fn my_survival(t: f64, x: f64, mu: f64) -> Result<ErrorBounded> {
    check_positive("T", t)?;
    check_finite("x", x)?;
    check_finite("mu", mu)?;
    if mu >= 0.0 && t >= 0.05 {
        if let Ok(s) = my_survival_spectral(t, x, mu) {
            return Ok(s);
        }
    }
    my_survival_box(t, x, mu)
}

/// 𝒩^μ(T, x) by direct quadrature of Q^μ(T, y|x) over y.
pub fn my_survival_box(t: f64, x: f64, mu: f64) -> Result<ErrorBounded> {
    check_positive("T", t)?;
    check_finite("x", x)?;
    check_finite("mu", mu)?;
    // the free Gaussian peaks at x - μT, the killing confines to the right
    // of about -log(T)/2
    let center = (x - mu * t).max(-0.5 * t.ln().max(0.0) - 1.0).min(x + t.sqrt());
    let spec = QuadratureSpec::new(1e-300, 1e-9);
    let step = 0.5 * t.sqrt().max(0.25);
    let run = |relative: bool| {
        integrate_line(
            |y| Ok(my_q0(t, y, x, relative)?.value * (-mu * mu * t / 2.0 + mu * (x - y)).exp()),
            center,
            step,
            &spec,
        )
    };
    // pointwise absolute accuracy is enough unless the survival itself is
    // small compared with the cancellation in the single-integral form
    match run(false) {
        Ok(fast) if fast.value > 1e-4 => Ok(fast),
        _ => run(true),
    }
}

/// 𝒩^μ(T, x) for μ ≥ 0 with the y-integral done under the spectral
/// integral: ∫ K_{iν}(e^{-y}) e^{-μy} dy = 2^{μ-2} |Γ((μ+iν)/2)|², so
///
/// 𝒩^μ(T, x) = e^{-μ²T/2 + μx} (2/π²) ∫₀^∞ e^{-ν²T/2} K_{iν}(e^{-x}) ν sinh(πν) 2^{μ-2} |Γ((μ+iν)/2)|² dν.
pub fn my_survival_spectral(t: f64, x: f64, mu: f64) -> Result<ErrorBounded> {
    check_positive("T", t)?;
    check_finite("x", x)?;
    check_finite("mu", mu)?;
    if mu < 0.0 {
        return Err(Error::domain(format!("spectral survival needs mu >= 0, got {mu}")));
    }
    let r = (-x).exp();
    let fail = Failure::default();
    let f = |nu: f64| {
        let nu = nu.abs();
        if nu == 0.0 {
            // μ = 0: ν sinh(πν) |Γ(iν/2)|²/4 → π
            return if mu > 0.0 { 0.0 } else { fail.catch(bessel_k(Order::Real(0.0), r).map(|k| PI * k.value)) };
        }
        let v = bessel_k_scaled(Order::Imaginary(nu), r).and_then(|k| {
            let ln_sinh = PI * nu + (0.5 * (-(-2.0 * PI * nu).exp_m1())).ln();
            let ln_m = (mu - 2.0) * std::f64::consts::LN_2 + 2.0 * ln_abs_gamma_complex(0.5 * mu, 0.5 * nu)?;
            let l = -nu * nu * t / 2.0 + k.exponent + nu.ln() + ln_sinh + ln_m;
            Ok(k.mantissa * l.exp())
        });
        fail.catch(v)
    };
    let h0 = (0.5 / t.sqrt()).min(1.0 / (1.0 + x.max(0.0)));
    let spec = QuadratureSpec::new(1e-300, 1e-11);
    let i = trapezoid_even(f, h0, &spec)?;
    fail.check()?;
    Ok(i.scale(2.0 / (PI * PI) * (-mu * mu * t / 2.0 + mu * x).exp()))
}

/// Both sides of K₀(a)K₀(b) = ½ ∫_{log(b/a)}^∞ u J₀(√(2ab cosh u - a² - b²)) du.
pub fn kk4_product(a: f64, b: f64) -> Result<(f64, f64)> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    let lhs = bessel_k(Order::Real(0.0), a)?.value * bessel_k(Order::Real(0.0), b)?.value;
    let i = kk_integral(2.0 * a * b, a * a + b * b, (b / a).ln().abs(), None, &kk_spec(1.0))?;
    Ok((lhs, 0.5 * i.value))
}

/// Both sides of ∫ K₀(e^{-y}) e^{-μy} dy = 2^{μ-2} Γ(μ/2)², μ > 0.
pub fn mellin_k0(mu: f64) -> Result<(f64, f64)> {
    check_positive("mu", mu)?;
    let fail = Failure::default();
    let f = |y: f64| {
        let r = bessel_k_scaled(Order::Real(0.0), (-y).exp()).map(|k| {
            if k.mantissa == 0.0 {
                0.0
            } else {
                k.mantissa * (k.exponent - mu * y).exp()
            }
        });
        fail.catch(r)
    };
    let spec = QuadratureSpec::new(1e-300, 1e-12);
    let lhs = trapezoid_line(f, 0.0, 0.5f64.min(0.5 * mu), &spec)?;
    fail.check()?;
    let g = gamma(mu / 2.0)?.value;
    Ok((lhs.value, 2f64.powf(mu - 2.0) * g * g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::heat_kernel;

    fn k0(x: f64) -> f64 {
        bessel_k(Order::Real(0.0), x).unwrap().value
    }

    #[test]
    fn product_identity() {
        for (a, b) in [(1.0, 1.0), (0.5, 2.0), (0.1, 3.0)] {
            let (l, r) = kk4_product(a, b).unwrap();
            assert!((l - r).abs() < 1e-9 * l.abs(), "({a},{b}) {l} {r}");
        }
    }

    #[test]
    fn mellin_identity() {
        let (l, r) = mellin_k0(1.0).unwrap();
        assert!((r - PI / 2.0).abs() < 1e-14);
        assert!((l - r).abs() < 1e-10, "{l} {r}");
        for mu in [0.5, 2.0] {
            let (l, r) = mellin_k0(mu).unwrap();
            assert!((l - r).abs() < 1e-9 * r, "{mu}: {l} {r}");
        }
    }

    #[test]
    fn two_routes_agree() {
        for (t, y, x) in [(1.0, 0.3, 0.0), (0.2, -0.5, 0.4), (5.0, 2.0, -1.0), (50.0, 0.0, 0.5)] {
            let a = my_q(t, y, x, 0.0).unwrap().value;
            let b = my_q_spectral(t, y, x, 0.0).unwrap().value;
            assert!((a - b).abs() < 1e-8 * a.abs(), "({t},{y},{x}) {a} {b}");
        }
    }

    #[test]
    fn weak_potential_and_symmetry() {
        let q = my_q(0.01, 3.0, 3.0, 0.0).unwrap().value;
        let p = heat_kernel(0.01, 3.0, 3.0).unwrap();
        assert!((q / p - 1.0).abs() < 0.01);
        let a = my_q(0.7, 0.4, -0.3, 0.0).unwrap().value;
        let b = my_q(0.7, -0.3, 0.4, 0.0).unwrap().value;
        assert!((a - b).abs() < 1e-8 * a);
    }

    #[test]
    fn long_time_limit() {
        // √(π/2) t^{3/2} e^{μ²t/2} Q^μ(t, 0|0) → K₀(1)² at t = 200 within 2%
        let (t, mu) = (200.0, 0.5);
        let q = my_q(t, 0.0, 0.0, mu).unwrap().value;
        let r = (PI / 2.0).sqrt() * t.powf(1.5) * (mu * mu * t / 2.0).exp() * q / (k0(1.0) * k0(1.0));
        assert!((r - 1.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn survival_routes_agree() {
        for (t, x, mu) in [(1.5, 0.0, 0.3), (1.5, 0.0, 0.0), (1.5, -1.0, 0.3), (0.2, 2.0, 0.0), (10.0, 1.0, 1.5)] {
            let a = my_survival_spectral(t, x, mu).unwrap().value;
            let b = my_survival_box(t, x, mu).unwrap().value;
            assert!((a - b).abs() < 1e-9 * b, "({t},{x},{mu}) {a} {b}");
        }
    }

    #[test]
    fn survival_examples() {
        assert!(my_survival(1e-3, 3.0, 0.0).unwrap().value >= 0.999);
        let mut prev = 1.0;
        for t in [0.5, 1.0, 2.0, 4.0] {
            let s = my_survival(t, 0.0, 0.0).unwrap().value;
            assert!(s <= prev && s > 0.0, "{t}: {s}");
            prev = s;
        }
    }
}
