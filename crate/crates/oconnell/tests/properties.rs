//! Invariants checked on random inputs.

use oconnell::densities::{heat_kernel, km_density, q2_factorized, q_spectral};
use oconnell::pathsim::{fk_weight, sde_dyson, simulate_fk, Potential, Scheme, SimConfig};
use oconnell::quad::QuadratureSpec;
use oconnell::specfun::{bessel_k, gamma, Order};
use oconnell::whittaker::{drift_field, psi, psi0};
use proptest::prelude::*;

fn k(nu: f64, x: f64) -> f64 {
    bessel_k(Order::Real(nu), x).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bessel_k_solves_its_ode(nu in prop::sample::select(vec![0.0, 0.3, 1.0]), x in 0.2f64..5.0) {
        let h = 1e-4;
        let (km, k0, kp) = (k(nu, x - h), k(nu, x), k(nu, x + h));
        let d2 = (kp - 2.0 * k0 + km) / (h * h);
        let d1 = (kp - km) / (2.0 * h);
        let r = x * x * d2 + x * d1 - (x * x + nu * nu) * k0;
        prop_assert!(r.abs() <= 1e-5, "residual {r}");
    }

    #[test]
    fn imaginary_order_is_even(nu in 0.0f64..4.0, x in 0.1f64..6.0) {
        let a = bessel_k(Order::Imaginary(nu), x).unwrap().value;
        let b = bessel_k(Order::Imaginary(-nu), x).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
    }

    #[test]
    fn k0_decreasing(x in 0.01f64..20.0, dx in 1e-3f64..1.0) {
        let (a, b) = (k(0.0, x), k(0.0, x + dx));
        prop_assert!(b > 0.0 && b < a);
    }

    #[test]
    fn gamma_recurrence(x in 0.1f64..20.0) {
        let a = gamma(x + 1.0).unwrap().value;
        let b = x * gamma(x).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn psi_translation_covariance(
        nu in prop::array::uniform2(-1.5f64..1.5),
        x in prop::array::uniform2(-1.0f64..2.0),
        a in prop::sample::select(vec![-1.0, 0.7]),
    ) {
        let spec = QuadratureSpec::default();
        let p = psi(&nu, &x, &spec).unwrap().value;
        let shifted = [x[0] + a, x[1] + a];
        let q = psi(&nu, &shifted, &spec).unwrap().value;
        // λ = iν, so the factor e^{aΣλ} is a phase
        let phase = num_complex::Complex64::from_polar(1.0, a * (nu[0] + nu[1]));
        prop_assert!((q - phase * p).norm() <= 1e-8 * p.norm());
    }

    #[test]
    fn psi_conjugation(nu in prop::array::uniform2(-1.5f64..1.5), x in prop::array::uniform2(-1.0f64..2.0)) {
        let spec = QuadratureSpec::default();
        let p = psi(&nu, &x, &spec).unwrap().value;
        let q = psi(&[-nu[0], -nu[1]], &x, &spec).unwrap().value;
        prop_assert!((q - p.conj()).norm() <= 1e-10 * p.norm().max(1e-300));
    }

    #[test]
    fn ground_state_drift_sums_to_zero(x in prop::array::uniform3(-2.0f64..2.0)) {
        let f = drift_field(&x).unwrap();
        let scale: f64 = f.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!(f.iter().sum::<f64>().abs() <= 1e-6 * scale);
    }

    #[test]
    fn psi0_increases_with_gap(g in -4.0f64..4.0, dg in 0.05f64..1.0) {
        let spec = QuadratureSpec::default();
        let a = psi0(&[0.0, g], &spec).unwrap().value;
        let b = psi0(&[0.0, g + dg], &spec).unwrap().value;
        prop_assert!(b > a);
    }

    #[test]
    fn q2_symmetric_dominated_positive(
        t in 0.2f64..5.0,
        x in prop::array::uniform2(-2.0f64..2.0),
        y in prop::array::uniform2(-2.0f64..2.0),
    ) {
        let q = q2_factorized(t, &y, &x).unwrap();
        let r = q2_factorized(t, &x, &y).unwrap();
        let free = heat_kernel(t, y[0], x[0]).unwrap() * heat_kernel(t, y[1], x[1]).unwrap();
        prop_assert!(q.value >= -q.error_bound);
        prop_assert!(q.value <= free * (1.0 + 1e-10) + q.error_bound);
        prop_assert!((q.value - r.value).abs() <= 1e-8 * q.value.abs().max(1e-12));
    }

    #[test]
    fn karlin_mcgregor_below_free(t in 0.1f64..3.0, x in 0.0f64..2.0, g in 0.0f64..2.0, y in 0.0f64..2.0) {
        let xs = [x, x + g];
        let ys = [y, y + 0.5];
        let d = km_density(t, &ys, &xs).unwrap();
        let free = heat_kernel(t, ys[0], xs[0]).unwrap() * heat_kernel(t, ys[1], xs[1]).unwrap();
        prop_assert!(d >= -1e-15 && d <= free);
    }

    #[test]
    fn weights_in_unit_interval(path in prop::collection::vec(prop::array::uniform2(-3.0f64..3.0), 2..40), eps in 0.05f64..2.0) {
        let rows: Vec<Vec<f64>> = path.iter().map(|p| p.to_vec()).collect();
        let w = fk_weight(&rows, 0.01, eps).unwrap();
        // deeply crossed paths underflow to an exact zero
        prop_assert!((0.0..=1.0).contains(&w));
        if rows.iter().all(|p| p[1] >= p[0]) {
            prop_assert!(w > 0.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ensembles_do_not_depend_on_threads(seed in any::<u64>(), gap in 0.2f64..3.0) {
        let cfg = SimConfig::new(2, 0.5, 0.01, 400, seed).unwrap();
        let dyson = cfg.clone().with_scheme(Scheme::Adaptive);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                (
                    simulate_fk(&cfg, &[0.0, gap], &[0.0, 0.0], Potential::toda()).unwrap(),
                    sde_dyson(&dyson, &[0.0, gap]).unwrap(),
                )
            })
        };
        let one = run(1);
        for threads in [2, 4, 8] {
            prop_assert_eq!(&one, &run(threads));
        }
    }
}

#[test]
fn small_time_killing_is_negligible() {
    let x = [0.0, 3.0];
    let q = q_spectral(0.01, &x, &x, &QuadratureSpec::default()).unwrap().value;
    let free = heat_kernel(0.01, 0.0, 0.0).unwrap().powi(2);
    assert!((q / free - 1.0).abs() <= 0.02);
}
