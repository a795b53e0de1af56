//! Acceptance checks shared by `oconnell verify` and the acceptance test
//! target. Each criterion runs a few checks; a check passes when
//! |computed - expected| ≤ tolerance. One-sided bounds (KS distances) use
//! expected = 0.

use crate::densities::{
    chapman_kolmogorov_q2, from_minus_infinity, km_density, kk4_product, mellin_k0, my_survival, oconnell_density,
    q2_factorized, q2_spectral_double, q_spectral, q_spectral_mc, selberg_check, FromMinusInfinity,
};
use crate::error::{Error, Result};
use crate::pathsim::stats::{ks_one_sample, ks_two_sample, McEstimate, TabulatedCdf};
use crate::pathsim::{
    fk_density, fk_survival, my_explicit, pitman_scaled, scaling_limit_check, sde_dyson, sde_my, sde_oconnell,
    KillMode, Potential, Scheme, SimConfig,
};
use crate::quad::{gauss_kronrod, QuadratureSpec};
use crate::specfun::{bessel_k, gamma, theta, theta_contour, Order};
use crate::whittaker::{eigen_residual, psi, psi0, psi2_closed_form};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};
use std::str::FromStr;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Specfun,
    Whittaker,
    Densities,
    Pathsim,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "specfun" => Suite::Specfun,
            "whittaker" => Suite::Whittaker,
            "densities" => Suite::Densities,
            "pathsim" => Suite::Pathsim,
            "all" => Suite::All,
            _ => return Err(Error::Config(format!("unknown suite '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub wall_time_s: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, computed: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            computed,
            expected,
            tolerance,
            passed: (computed - expected).abs() <= tolerance,
            wall_time_s: 0.0,
        }
    }

    /// computed within `rel` of expected, relatively.
    pub fn relative(name: impl Into<String>, computed: f64, expected: f64, rel: f64) -> Self {
        Check::new(name, computed, expected, rel * expected.abs())
    }

    /// 0 ≤ computed ≤ bound.
    pub fn at_most(name: impl Into<String>, computed: f64, bound: f64) -> Self {
        let mut c = Check::new(name, computed, 0.0, bound);
        c.passed &= computed >= 0.0;
        c
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, f64::from(u8::from(ok)), 1.0, 0.0)
    }

    fn failed(name: impl Into<String>, err: &Error) -> Self {
        Check {
            name: format!("{}: {err}", name.into()),
            computed: f64::NAN,
            expected: f64::NAN,
            tolerance: 0.0,
            passed: false,
            wall_time_s: 0.0,
        }
    }
}

pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    pub suite: Suite,
    /// Deterministic quadrature only; part of `--fast`.
    pub fast: bool,
    /// Set when the tolerance is known not to hold; the reason is shown.
    pub known_failure: Option<&'static str>,
    run: fn() -> Result<Vec<Check>>,
}

impl Criterion {
    pub fn run(&self) -> CriterionResult {
        let start = Instant::now();
        let checks = match (self.run)() {
            Ok(c) => c,
            Err(e) => vec![Check::failed(self.title, &e)],
        };
        let elapsed = start.elapsed().as_secs_f64();
        let share = elapsed / checks.len() as f64;
        let checks: Vec<Check> = checks
            .into_iter()
            .map(|mut c| {
                c.wall_time_s = share;
                c
            })
            .collect();
        CriterionResult {
            id: self.id,
            title: self.title.to_string(),
            passed: checks.iter().all(|c| c.passed),
            known_failure: self.known_failure.map(str::to_string),
            wall_time_s: elapsed,
            checks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: String,
    pub passed: bool,
    pub known_failure: Option<String>,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub fast: bool,
    pub criteria: Vec<CriterionResult>,
    /// Conjunction of all criteria.
    pub passed: bool,
}

/// Runs the criteria of `suite`, calling `progress` after each one.
pub fn run_suite<F: FnMut(&CriterionResult)>(suite: Suite, fast: bool, mut progress: F) -> VerificationReport {
    let mut out = Vec::new();
    for c in criteria() {
        if (suite == Suite::All || c.suite == suite) && (!fast || c.fast) {
            let r = c.run();
            progress(&r);
            out.push(r);
        }
    }
    let passed = out.iter().all(|r| r.passed);
    VerificationReport {
        suite,
        fast,
        criteria: out,
        passed,
    }
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            title: "Selberg integral",
            suite: Suite::Densities,
            fast: true,
            known_failure: None,
            run: selberg,
        },
        Criterion {
            id: 2,
            title: "Mellin transform of K0",
            suite: Suite::Specfun,
            fast: true,
            known_failure: None,
            run: mellin,
        },
        Criterion {
            id: 3,
            title: "K0 product formula",
            suite: Suite::Specfun,
            fast: true,
            known_failure: None,
            run: product,
        },
        Criterion {
            id: 4,
            title: "N=2 Whittaker closed form",
            suite: Suite::Whittaker,
            fast: true,
            known_failure: None,
            run: whittaker_closed_form,
        },
        Criterion {
            id: 5,
            title: "Toda eigenfunction residual",
            suite: Suite::Whittaker,
            fast: true,
            known_failure: None,
            run: eigen,
        },
        Criterion {
            id: 6,
            title: "Q2 spectral vs factorized",
            suite: Suite::Densities,
            fast: true,
            known_failure: None,
            run: q2_routes,
        },
        Criterion {
            id: 7,
            title: "Chapman-Kolmogorov for Q2",
            suite: Suite::Densities,
            fast: true,
            known_failure: None,
            run: chapman_kolmogorov,
        },
        Criterion {
            id: 8,
            title: "Large-t asymptotics of Q_N",
            suite: Suite::Densities,
            fast: false,
            known_failure: Some("corrections are O(1/t): ratio 1.041 at t=100 for N=2, about 1.3 at t=50 for N=3"),
            run: lemma1,
        },
        Criterion {
            id: 9,
            title: "Long-time survival",
            suite: Suite::Densities,
            fast: true,
            known_failure: None,
            run: long_survival,
        },
        Criterion {
            id: 10,
            title: "theta asymptotics and routes",
            suite: Suite::Specfun,
            fast: true,
            known_failure: Some("sqrt(2 pi t^3) theta_r(t)/K0(r) is 1.06-1.09 at t=50; convergence is O(1/t)"),
            run: theta_checks,
        },
        Criterion {
            id: 11,
            title: "Feynman-Kac density vs spectral",
            suite: Suite::Pathsim,
            fast: false,
            known_failure: None,
            run: fk_vs_spectral,
        },
        Criterion {
            id: 12,
            title: "Ultradiscrete survival vs Karlin-McGregor",
            suite: Suite::Pathsim,
            fast: false,
            known_failure: Some("the eps=0.05 soft wall sits 2 eps(log eps + gamma) off the hard wall: 0.888 vs 0.843"),
            run: ultradiscrete,
        },
        Criterion {
            id: 13,
            title: "Conditioned SDE vs transition density",
            suite: Suite::Pathsim,
            fast: false,
            known_failure: None,
            run: theorem2,
        },
        Criterion {
            id: 14,
            title: "One-particle constructions",
            suite: Suite::Pathsim,
            fast: false,
            known_failure: None,
            run: my_triangle,
        },
        Criterion {
            id: 15,
            title: "Dyson model and scaling limit",
            suite: Suite::Pathsim,
            fast: false,
            known_failure: None,
            run: dyson,
        },
        Criterion {
            id: 16,
            title: "Distribution started from -infinity",
            suite: Suite::Pathsim,
            fast: false,
            known_failure: None,
            run: from_minus_inf,
        },
        Criterion {
            id: 17,
            title: "Simulation output independent of threads",
            suite: Suite::Pathsim,
            fast: false,
            known_failure: None,
            run: determinism,
        },
    ]
}

const PATHS: usize = 100_000;
const SEED: u64 = 20_240_601;

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

fn selberg() -> Result<Vec<Check>> {
    let two = selberg_check(2)?;
    let three = selberg_check(3)?;
    Ok(vec![
        Check::new("N=2 exact is pi", two.exact, PI, 1e-12),
        Check::new("N=2 computed", two.computed, two.exact, 1e-6),
        Check::relative("N=3 computed", three.computed, three.exact, 1e-4),
    ])
}

fn mellin() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for mu in [0.5, 1.0, 2.0] {
        let (lhs, rhs) = mellin_k0(mu)?;
        out.push(Check::new(format!("mu={mu}"), lhs, rhs, 1e-6));
    }
    out.push(Check::new("mu=1 value", mellin_k0(1.0)?.0, PI / 2.0, 1e-6));
    Ok(out)
}

fn product() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (a, b) in [(1.0, 1.0), (0.5, 2.0)] {
        let (lhs, rhs) = kk4_product(a, b)?;
        out.push(Check::new(format!("({a}, {b})"), rhs, lhs, 1e-6));
    }
    Ok(out)
}

fn whittaker_closed_form() -> Result<Vec<Check>> {
    let points: [([f64; 2], [f64; 2]); 5] = [
        ([0.0, 0.0], [0.0, 1.0]),
        ([1.0, -1.0], [0.0, 1.0]),
        ([0.3, -0.7], [-0.5, 1.0]),
        ([2.0, 0.5], [0.0, 2.0]),
        ([0.5, 0.5], [1.0, 0.5]),
    ];
    let mut out = Vec::new();
    for (nu, x) in points {
        let q = psi(&nu, &x, &spec())?.value;
        let c = psi2_closed_form(&nu, &x)?;
        out.push(Check::new(format!("nu={nu:?} x={x:?}"), (q - c).norm() / c.norm(), 0.0, 1e-6));
    }
    Ok(out)
}

fn eigen() -> Result<Vec<Check>> {
    let points: [([f64; 2], [f64; 2]); 3] = [([0.0, 0.0], [0.0, 1.0]), ([0.5, -0.5], [-0.3, 0.8]), ([1.2, 0.1], [0.0, 2.0])];
    points
        .iter()
        .map(|(nu, x)| Ok(Check::at_most(format!("nu={nu:?} x={x:?}"), eigen_residual(nu, x)?, 1e-4)))
        .collect()
}

fn q2_routes() -> Result<Vec<Check>> {
    let points: [(f64, [f64; 2], [f64; 2]); 5] = [
        (1.0, [0.0, 2.0], [0.5, 2.5]),
        (0.2, [0.0, 1.0], [0.1, 1.2]),
        (0.5, [-1.0, 1.0], [0.0, 0.5]),
        (2.0, [0.0, 3.0], [1.0, 1.5]),
        (5.0, [0.0, 2.0], [-1.0, 3.0]),
    ];
    let mut out = Vec::new();
    for (t, x, y) in points {
        let a = q2_spectral_double(t, &y, &x, &spec())?.value;
        let b = q2_factorized(t, &y, &x)?.value;
        out.push(Check::relative(format!("t={t} x={x:?} y={y:?}"), a, b, 1e-5));
    }
    Ok(out)
}

fn chapman_kolmogorov() -> Result<Vec<Check>> {
    let (lhs, rhs) = chapman_kolmogorov_q2(0.5, 0.5, &[0.0, 2.0], &[0.3, 2.3])?;
    Ok(vec![Check::relative("s=t=0.5", lhs, rhs, 1e-4)])
}

fn lemma1() -> Result<Vec<Check>> {
    let x2 = [0.0, 2.0];
    let t = 100.0;
    let p2 = psi0(&x2, &spec())?.value;
    let q2 = q_spectral(t, &x2, &x2, &spec())?.value;
    let ratio2 = t * t * q2 * 2.0 * PI / (p2 * p2);
    let x3 = [0.0, 2.0, 4.0];
    let t3: f64 = 50.0;
    let p3 = psi0(&x3, &spec())?.value;
    let c3 = gamma(1.0)?.value * gamma(2.0)?.value * gamma(3.0)?.value / (2.0 * PI).powf(1.5);
    let mc = q_spectral_mc(t3, &x3, &x3, 20_000, SEED)?;
    let scale = t3.powf(4.5) / (c3 * p3 * p3);
    Ok(vec![
        Check::relative("N=2 t=100 ratio", ratio2, 1.0, 0.02),
        Check::new("N=3 t=50 ratio (3 MC s.e.)", mc.value * scale, 1.0, 3.0 * mc.error_bound * scale),
    ])
}

fn long_survival() -> Result<Vec<Check>> {
    let (t, mu): (f64, f64) = (200.0, 0.8);
    let n = my_survival(t, 0.0, mu)?.value;
    let lhs = (PI / 2.0).sqrt() * t.powf(1.5) * (mu * mu * t / 2.0).exp() * n;
    let rhs = 2f64.powf(mu - 2.0) * gamma(mu / 2.0)?.value.powi(2) * bessel_k(Order::Real(0.0), 1.0)?.value;
    Ok(vec![Check::relative("T=200 mu=0.8", lhs, rhs, 0.03)])
}

fn theta_checks() -> Result<Vec<Check>> {
    let t: f64 = 50.0;
    let mut out = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        let lhs = (2.0 * PI * t.powi(3)).sqrt() * theta(r, t)?.value;
        out.push(Check::relative(format!("t=50 r={r}"), lhs, bessel_k(Order::Real(0.0), r)?.value, 0.02));
    }
    let a = theta(1.0, 1.0)?.value;
    let b = theta_contour(1.0, 1.0)?.value;
    out.push(Check::new("two routes at (1, 1)", a, b, 1e-6));
    Ok(out)
}

fn fk_vs_spectral() -> Result<Vec<Check>> {
    let cfg = SimConfig::new(2, 1.0, 1e-3, PATHS, SEED)?;
    let (x, y) = ([0.0, 2.0], [0.5, 2.5]);
    let q = q_spectral(1.0, &y, &x, &spec())?;
    let w = fk_density(&cfg, &x, &y, None)?.estimate;
    let b = fk_density(&cfg.clone().with_kill_mode(KillMode::Bernoulli), &x, &y, None)?.estimate;
    Ok(vec![
        Check::new("weighted vs spectral", w.value, q.value, 3.0 * w.error_bound.hypot(q.error_bound)),
        Check::new("bernoulli vs weighted", b.value, w.value, 3.0 * b.error_bound.hypot(w.error_bound)),
    ])
}

/// ∫_{y₁<y₂} det[p(T, y_j|x_k)] dy in centre/gap coordinates.
fn km_survival(t: f64, x: &[f64; 2]) -> Result<f64> {
    let s = QuadratureSpec::new(1e-13, 1e-10);
    let c0 = 0.5 * (x[0] + x[1]);
    let w = 12.0 * t.sqrt();
    let mut fail = None;
    let outer = gauss_kronrod(
        |g| {
            let inner = gauss_kronrod(
                |c| km_density(t, &[c - 0.5 * g, c + 0.5 * g], x).unwrap_or(f64::NAN),
                c0 - w,
                c0 + w,
                &s,
            );
            match inner {
                Ok(v) => v.value,
                Err(e) => {
                    fail = Some(e);
                    0.0
                }
            }
        },
        0.0,
        (x[1] - x[0]) + 2.0 * w,
        &s,
    )?;
    match fail {
        Some(e) => Err(e),
        None => Ok(outer.value),
    }
}

fn ultradiscrete() -> Result<Vec<Check>> {
    let x = [0.0, 2.0];
    let cfg = SimConfig::new(2, 1.0, 1e-3, PATHS, SEED)?;
    let s = fk_survival(&cfg, &x, &[0.0, 0.0], Potential::Toda { eps: 0.05 })?;
    let km = km_survival(1.0, &x)?;
    Ok(vec![Check::new("eps=0.05 T=1", s.value, km, 3.0 * s.std_error)])
}

fn theorem2() -> Result<Vec<Check>> {
    let x0 = [0.0, 2.0];
    let cfg = SimConfig::new(2, 1.0, 1e-3, PATHS, SEED)?.with_scheme(Scheme::Adaptive);
    let e = sde_oconnell(&cfg, &x0)?;
    // the law factorizes into a Gaussian centre of mass and the relative
    // coordinate, which follows the one-particle model at half speed
    let eta0 = 0.5 * (x0[1] - x0[0]) - LN_2;
    let eta: Vec<f64> = e.gaps(0).iter().map(|g| 0.5 * g - LN_2).collect();
    let cdf = TabulatedCdf::new(|v| Ok(oconnell_density(0.5, &[v], &[eta0])?.value), -5.0, 9.0, 700)?;
    let ks_eta = ks_one_sample(&eta, |v| cdf.cdf(v));
    let sum: Vec<f64> = (0..e.len()).map(|i| e.position(i)[0] + e.position(i)[1]).collect();
    let s0 = x0[0] + x0[1];
    let ks_sum = ks_one_sample(&sum, |v| 0.5 * (1.0 + libm::erf((v - s0) / 2.0)));
    let mut half = SimConfig::new(1, 0.5, 1e-3, PATHS, SEED ^ 1)?.with_scheme(Scheme::Adaptive);
    half.n_particles = 1;
    let my = sde_my(&half, eta0, 0.0)?.coordinate(0);
    Ok(vec![
        Check::at_most("KS relative coordinate vs density", ks_eta, 0.02),
        Check::at_most("KS centre of mass vs Gaussian", ks_sum, 0.02),
        Check::at_most("KS relative coordinate vs one-particle SDE at t/2", ks_two_sample(&eta, &my), 0.03),
    ])
}

fn from_minus_inf_cdf(t: f64) -> Result<TabulatedCdf> {
    TabulatedCdf::new(
        |v| Ok(from_minus_infinity(FromMinusInfinity::InfiniteT, t, v, 0.0)?.value),
        -8.0,
        10.0,
        900,
    )
}

fn bes3_cdf(r: f64, t: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let u = r / t.sqrt();
    libm::erf(u / 2f64.sqrt()) - (2.0 / PI).sqrt() * u * (-0.5 * u * u).exp()
}

fn my_triangle() -> Result<Vec<Check>> {
    let cfg = SimConfig::new(1, 1.0, 1e-3, PATHS, SEED)?;
    let z = my_explicit(&cfg, 0.0)?;
    // x0 = -8 stands in for -infinity: the drift there is e^8
    let m = sde_my(&cfg.clone().with_scheme(Scheme::Adaptive), -8.0, 0.0)?.coordinate(0);
    let cdf = from_minus_inf_cdf(1.0)?;
    let p = pitman_scaled(&SimConfig::new(1, 1.0, 1e-3, PATHS, SEED ^ 2)?, 0.05)?;
    Ok(vec![
        Check::at_most("KS explicit vs SDE from -8", ks_two_sample(&z, &m), 0.02),
        Check::at_most("KS explicit vs density", ks_one_sample(&z, |v| cdf.cdf(v)), 0.02),
        Check::at_most("KS SDE from -8 vs density", ks_one_sample(&m, |v| cdf.cdf(v)), 0.02),
        Check::at_most("KS Pitman scaling eps=0.05 vs 2M-B", ks_one_sample(&p, |r| bes3_cdf(r, 1.0)), 0.03),
    ])
}

fn dyson() -> Result<Vec<Check>> {
    let cfg = SimConfig::new(2, 1.0, 1e-3, PATHS, SEED)?.with_scheme(Scheme::Adaptive);
    let e = sde_dyson(&cfg, &[0.0, 1.0])?;
    let g2: Vec<f64> = e.gaps(0).iter().map(|g| g * g).collect();
    let m = McEstimate::from_samples(&g2)?;
    let from_zero = sde_dyson(&cfg, &[0.0, 1e-6])?;
    let r: Vec<f64> = from_zero.gaps(0).iter().map(|g| g / 2f64.sqrt()).collect();
    let rep = scaling_limit_check(&[0.2, 0.1, 0.05], &cfg, &[0.0, 1.0])?;
    Ok(vec![
        Check::new("E gap^2 = 1 + 6t", m.value, 7.0, 3.0 * m.std_error),
        Check::at_most("KS gap/sqrt2 from 0+ vs BES(3)", ks_one_sample(&r, |v| bes3_cdf(v, 1.0)), 0.02),
        Check::flag(format!("KS decreasing over eps: {:?}", rep.ks), rep.monotone),
        Check::at_most("KS eps=0.05 vs Dyson", rep.ks[2], 0.03),
    ])
}

fn from_minus_inf() -> Result<Vec<Check>> {
    let cdf = from_minus_inf_cdf(1.0)?;
    let z = my_explicit(&SimConfig::new(1, 1.0, 1e-3, PATHS, SEED ^ 3)?, 0.0)?;
    Ok(vec![
        Check::new("normalization at t=1", cdf.mass, 1.0, 1e-3),
        Check::at_most("KS simulation vs density", ks_one_sample(&z, |v| cdf.cdf(v)), 0.02),
    ])
}

fn determinism() -> Result<Vec<Check>> {
    let runs: [&[&str]; 2] = [
        &["simulate", "fk", "--n", "2", "--t", "1", "--x", "0,2", "--paths", "100000", "--dt", "0.001", "--seed", "42"],
        &["simulate", "sde_dyson", "--n", "2", "--t", "1", "--x", "0,1", "--paths", "20000", "--dt", "0.001", "--seed", "7"],
    ];
    let mut out = Vec::new();
    for args in runs {
        let mut outputs = Vec::new();
        for threads in [1, 4, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            outputs.push(pool.install(|| crate::cli::render(args.iter().copied()))?);
        }
        let same = outputs.windows(2).all(|p| p[0] == p[1]);
        out.push(Check::flag(format!("{} identical on 1/4/8 threads", args[1]), same));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn karlin_mcgregor_survival_is_erf() {
        let s = km_survival(1.0, &[0.0, 2.0]).unwrap();
        assert!((s - libm::erf(1.0)).abs() < 1e-8, "{s}");
    }

    #[test]
    fn criteria_are_numbered_in_order() {
        let c = criteria();
        assert_eq!(c.len(), 17);
        assert!(c.iter().enumerate().all(|(i, c)| c.id as usize == i + 1));
    }

    #[test]
    fn aggregate_is_conjunction() {
        let r = run_suite(Suite::Whittaker, true, |_| {});
        assert_eq!(r.passed, r.criteria.iter().all(|c| c.passed));
        assert_eq!(r.criteria.len(), 2);
    }
}
