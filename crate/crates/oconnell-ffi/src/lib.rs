//! C ABI over `oconnell`.
//!
//! Every function returns an [`OcStatus`]; results go through out-pointers.
//! On failure the message is available from [`oc_last_error`] on the same
//! thread until the next call. Simulation configurations and ensembles are
//! opaque handles released with their `_free` function.
//!
//! # Safety
//!
//! Functions taking pointers are `unsafe`: array arguments must point to the
//! stated number of readable doubles, out-pointers must be writable, and
//! handles must come from this library and not have been freed. Null is
//! reported as `OC_STATUS_NULL_POINTER`.

#![allow(clippy::missing_safety_doc)]

use oconnell::densities::{
    heat_kernel, my_q, oconnell_density, q2_factorized, q_spectral, q_spectral_mc, survival_n, DensityEstimate,
};
use oconnell::pathsim::{
    fk_density, my_explicit, sde_dyson, sde_my, sde_oconnell, simulate_fk, KillMode, PathEnsemble, Potential, Scheme,
    SimConfig,
};
use oconnell::quad::{ErrorBounded, QuadratureSpec};
use oconnell::specfun::{bessel_i_any, bessel_j0, bessel_k, gamma, theta, Order};
use oconnell::whittaker::{psi, psi0};
use oconnell::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcStatus {
    Ok = 0,
    Domain = 1,
    Convergence = 2,
    Capability = 3,
    Estimation = 4,
    Integration = 5,
    Config = 6,
    NullPointer = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// A value with an absolute error bound (or a standard error for Monte Carlo).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OcValue {
    pub value: f64,
    pub error_bound: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OcComplex {
    pub re: f64,
    pub im: f64,
    pub error_bound: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcScheme {
    Euler = 0,
    TamedEuler = 1,
    Adaptive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcKillMode {
    Weighted = 0,
    Bernoulli = 1,
}

/// Opaque simulation configuration.
pub struct OcSimConfig(SimConfig);

/// Opaque ensemble of terminal configurations.
pub struct OcEnsemble(PathEnsemble);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> OcStatus {
    match e {
        Error::Domain(_) => OcStatus::Domain,
        Error::Convergence { .. } => OcStatus::Convergence,
        Error::Capability(_) => OcStatus::Capability,
        Error::Estimation(_) => OcStatus::Estimation,
        Error::Integration(_) => OcStatus::Integration,
        Error::Config(_) => OcStatus::Config,
    }
}

enum Fail {
    Lib(Error),
    Null(&'static str),
    Small(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, turning errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> OcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OcStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            OcStatus::NullPointer
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("buffer too small: need {need} entries"));
            OcStatus::BufferTooSmall
        }
        Err(_) => {
            set_error("internal panic".into());
            OcStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    // SAFETY: the caller passes either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or(Fail::Null(what))
}

fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    // SAFETY: the caller guarantees `n` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    // SAFETY: non-null handles come from this library and are still live.
    unsafe { p.as_ref() }.ok_or(Fail::Null(what))
}

fn bounded(v: ErrorBounded) -> OcValue {
    OcValue {
        value: v.value,
        error_bound: v.error_bound,
    }
}

fn density(v: DensityEstimate) -> OcValue {
    OcValue {
        value: v.value,
        error_bound: v.error_bound,
    }
}

/// Message of the last failed call on this thread; empty if none. Valid
/// until the next call on this thread.
#[no_mangle]
pub extern "C" fn oc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn oc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn oc_gamma(x: f64, result: *mut OcValue) -> OcStatus {
    guard(|| {
        *out(result, "result")? = bounded(gamma(x)?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_bessel_j0(x: f64, result: *mut OcValue) -> OcStatus {
    guard(|| {
        *out(result, "result")? = bounded(bessel_j0(x)?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_bessel_i(order: f64, x: f64, result: *mut OcValue) -> OcStatus {
    guard(|| {
        *out(result, "result")? = bounded(bessel_i_any(order, x)?);
        Ok(())
    })
}

/// K_order(x), or K_{i order}(x) when `imaginary` is nonzero.
#[no_mangle]
pub unsafe extern "C" fn oc_bessel_k(order: f64, imaginary: i32, x: f64, result: *mut OcValue) -> OcStatus {
    guard(|| {
        let o = if imaginary != 0 { Order::Imaginary(order) } else { Order::Real(order) };
        *out(result, "result")? = bounded(bessel_k(o, x)?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_theta(r: f64, t: f64, result: *mut OcValue) -> OcStatus {
    guard(|| {
        *out(result, "result")? = bounded(theta(r, t)?);
        Ok(())
    })
}

/// ψ_{iν}(x) for `n` particles.
#[no_mangle]
pub unsafe extern "C" fn oc_psi(nu: *const f64, x: *const f64, n: usize, result: *mut OcComplex) -> OcStatus {
    guard(|| {
        let v = psi(slice(nu, n, "nu")?, slice(x, n, "x")?, &QuadratureSpec::default())?;
        *out(result, "result")? = OcComplex {
            re: v.value.re,
            im: v.value.im,
            error_bound: v.error_bound,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_psi0(x: *const f64, n: usize, result: *mut OcValue) -> OcStatus {
    guard(|| {
        *out(result, "result")? = bounded(psi0(slice(x, n, "x")?, &QuadratureSpec::default())?);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_heat_kernel(t: f64, y: f64, x: f64, result: *mut OcValue) -> OcStatus {
    guard(|| {
        *out(result, "result")? = OcValue {
            value: heat_kernel(t, y, x)?,
            error_bound: 0.0,
        };
        Ok(())
    })
}

/// Killed transition density Q_N(t, y|x) by spectral quadrature.
#[no_mangle]
pub unsafe extern "C" fn oc_q_spectral(t: f64, y: *const f64, x: *const f64, n: usize, result: *mut OcValue) -> OcStatus {
    guard(|| {
        let v = q_spectral(t, slice(y, n, "y")?, slice(x, n, "x")?, &QuadratureSpec::default())?;
        *out(result, "result")? = density(v);
        Ok(())
    })
}

/// Q_2(t, y|x) in closed-form-factorized form; `y` and `x` hold 2 entries.
#[no_mangle]
pub unsafe extern "C" fn oc_q2_factorized(t: f64, y: *const f64, x: *const f64, result: *mut OcValue) -> OcStatus {
    guard(|| {
        *out(result, "result")? = density(q2_factorized(t, slice(y, 2, "y")?, slice(x, 2, "x")?)?);
        Ok(())
    })
}

/// Monte Carlo estimate of Q_N; `error_bound` is the standard error.
#[no_mangle]
pub unsafe extern "C" fn oc_q_spectral_mc(
    t: f64,
    y: *const f64,
    x: *const f64,
    n: usize,
    samples: usize,
    seed: u64,
    result: *mut OcValue,
) -> OcStatus {
    guard(|| {
        *out(result, "result")? = density(q_spectral_mc(t, slice(y, n, "y")?, slice(x, n, "x")?, samples, seed)?);
        Ok(())
    })
}

/// One-particle killed density with potential e^{-2x}/2 and drift mu.
#[no_mangle]
pub unsafe extern "C" fn oc_my_q(t: f64, y: f64, x: f64, mu: f64, result: *mut OcValue) -> OcStatus {
    guard(|| {
        *out(result, "result")? = density(my_q(t, y, x, mu)?);
        Ok(())
    })
}

/// Survival probability up to time t from x with drift mu, N ≤ 2.
#[no_mangle]
pub unsafe extern "C" fn oc_survival(t: f64, x: *const f64, mu: *const f64, n: usize, result: *mut OcValue) -> OcStatus {
    guard(|| {
        let v = survival_n(t, slice(x, n, "x")?, slice(mu, n, "mu")?, &QuadratureSpec::default())?;
        *out(result, "result")? = bounded(v);
        Ok(())
    })
}

/// Transition density of the conditioned process, N ≤ 2.
#[no_mangle]
pub unsafe extern "C" fn oc_oconnell_density(t: f64, y: *const f64, x: *const f64, n: usize, result: *mut OcValue) -> OcStatus {
    guard(|| {
        *out(result, "result")? = density(oconnell_density(t, slice(y, n, "y")?, slice(x, n, "x")?)?);
        Ok(())
    })
}

/// Creates a configuration (Euler scheme, weighted killing).
#[no_mangle]
pub unsafe extern "C" fn oc_sim_config_new(
    n_particles: usize,
    t_final: f64,
    dt: f64,
    paths: usize,
    seed: u64,
    config: *mut *mut OcSimConfig,
) -> OcStatus {
    guard(|| {
        let slot = out(config, "config")?;
        let c = SimConfig::new(n_particles, t_final, dt, paths, seed)?;
        *slot = Box::into_raw(Box::new(OcSimConfig(c)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_sim_config_set_scheme(config: *mut OcSimConfig, scheme: OcScheme) -> OcStatus {
    guard(|| {
        out(config, "config")?.0.scheme = match scheme {
            OcScheme::Euler => Scheme::Euler,
            OcScheme::TamedEuler => Scheme::TamedEuler,
            OcScheme::Adaptive => Scheme::Adaptive,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_sim_config_set_kill_mode(config: *mut OcSimConfig, mode: OcKillMode) -> OcStatus {
    guard(|| {
        out(config, "config")?.0.kill_mode = match mode {
            OcKillMode::Weighted => KillMode::Weighted,
            OcKillMode::Bernoulli => KillMode::Bernoulli,
        };
        Ok(())
    })
}

/// Releases a configuration; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn oc_sim_config_free(config: *mut OcSimConfig) {
    if !config.is_null() {
        // SAFETY: created by oc_sim_config_new and not freed before.
        drop(unsafe { Box::from_raw(config) });
    }
}

fn simulate<F>(config: *const OcSimConfig, ensemble: *mut *mut OcEnsemble, f: F) -> OcStatus
where
    F: FnOnce(&SimConfig) -> oconnell::Result<PathEnsemble>,
{
    guard(|| {
        let cfg = handle(config, "config")?;
        let slot = out(ensemble, "ensemble")?;
        let e = f(&cfg.0)?;
        *slot = Box::into_raw(Box::new(OcEnsemble(e)));
        Ok(())
    })
}

/// Brownian motions from `x0` with velocity `drift`, killed at rate
/// Σ exp(-(x_{j+1} - x_j)/eps).
#[no_mangle]
pub unsafe extern "C" fn oc_simulate_fk(
    config: *const OcSimConfig,
    x0: *const f64,
    drift: *const f64,
    eps: f64,
    ensemble: *mut *mut OcEnsemble,
) -> OcStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let n = cfg.0.n_particles;
        let e = simulate_fk(&cfg.0, slice(x0, n, "x0")?, slice(drift, n, "drift")?, Potential::Toda { eps })?;
        *out(ensemble, "ensemble")? = Box::into_raw(Box::new(OcEnsemble(e)));
        Ok(())
    })
}

/// The conditioned process (N ≤ 4) from `x0`.
#[no_mangle]
pub unsafe extern "C" fn oc_sde_oconnell(
    config: *const OcSimConfig,
    x0: *const f64,
    ensemble: *mut *mut OcEnsemble,
) -> OcStatus {
    sde_with_start(config, x0, ensemble, sde_oconnell)
}

/// Dyson Brownian motion (β = 2) from `x0`.
#[no_mangle]
pub unsafe extern "C" fn oc_sde_dyson(config: *const OcSimConfig, x0: *const f64, ensemble: *mut *mut OcEnsemble) -> OcStatus {
    sde_with_start(config, x0, ensemble, sde_dyson)
}

fn sde_with_start(
    config: *const OcSimConfig,
    x0: *const f64,
    ensemble: *mut *mut OcEnsemble,
    f: fn(&SimConfig, &[f64]) -> oconnell::Result<PathEnsemble>,
) -> OcStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let e = f(&cfg.0, slice(x0, cfg.0.n_particles, "x0")?)?;
        *out(ensemble, "ensemble")? = Box::into_raw(Box::new(OcEnsemble(e)));
        Ok(())
    })
}

/// One-particle conditioned process with drift mu, started at x0.
#[no_mangle]
pub unsafe extern "C" fn oc_sde_my(config: *const OcSimConfig, x0: f64, mu: f64, ensemble: *mut *mut OcEnsemble) -> OcStatus {
    simulate(config, ensemble, |c| sde_my(c, x0, mu))
}

/// The same process started from -infinity, built from exponential functionals.
#[no_mangle]
pub unsafe extern "C" fn oc_my_explicit(config: *const OcSimConfig, mu: f64, ensemble: *mut *mut OcEnsemble) -> OcStatus {
    simulate(config, ensemble, |c| {
        let z = my_explicit(c, mu)?;
        Ok(PathEnsemble {
            n_particles: 1,
            weights: vec![1.0; z.len()],
            streams: (0..z.len() as u64).map(oconnell::pathsim::rng::path_stream).collect(),
            positions: z,
        })
    })
}

/// Kernel estimate of Q_N(t, y|x) from killed paths (t from the config).
#[no_mangle]
pub unsafe extern "C" fn oc_fk_density(
    config: *const OcSimConfig,
    x: *const f64,
    y: *const f64,
    result: *mut OcValue,
) -> OcStatus {
    guard(|| {
        let cfg = handle(config, "config")?;
        let n = cfg.0.n_particles;
        let est = fk_density(&cfg.0, slice(x, n, "x")?, slice(y, n, "y")?, None)?;
        *out(result, "result")? = density(est.estimate);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_ensemble_len(ensemble: *const OcEnsemble, len: *mut usize) -> OcStatus {
    guard(|| {
        *out(len, "len")? = handle(ensemble, "ensemble")?.0.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oc_ensemble_particles(ensemble: *const OcEnsemble, n: *mut usize) -> OcStatus {
    guard(|| {
        *out(n, "n")? = handle(ensemble, "ensemble")?.0.n_particles;
        Ok(())
    })
}

fn copy_out(src: &[f64], buf: *mut f64, cap: usize) -> Result<(), Fail> {
    if cap < src.len() {
        return Err(Fail::Small(src.len()));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(Fail::Null("buffer"));
    }
    // SAFETY: buf has room for cap >= src.len() doubles.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len()) };
    Ok(())
}

/// Copies positions, row-major (len × particles), into `buf`.
#[no_mangle]
pub unsafe extern "C" fn oc_ensemble_positions(ensemble: *const OcEnsemble, buf: *mut f64, cap: usize) -> OcStatus {
    guard(|| copy_out(&handle(ensemble, "ensemble")?.0.positions, buf, cap))
}

/// Copies survival weights (len entries) into `buf`.
#[no_mangle]
pub unsafe extern "C" fn oc_ensemble_weights(ensemble: *const OcEnsemble, buf: *mut f64, cap: usize) -> OcStatus {
    guard(|| copy_out(&handle(ensemble, "ensemble")?.0.weights, buf, cap))
}

/// Releases an ensemble; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn oc_ensemble_free(ensemble: *mut OcEnsemble) {
    if !ensemble.is_null() {
        // SAFETY: created by a simulate call and not freed before.
        drop(unsafe { Box::from_raw(ensemble) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    fn last_error() -> String {
        // SAFETY: oc_last_error always returns a valid C string.
        unsafe { CStr::from_ptr(oc_last_error()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn scalar_values() {
        unsafe {
            let mut v = OcValue::default();
            assert_eq!(oc_gamma(4.0, &mut v), OcStatus::Ok);
            assert!((v.value - 6.0).abs() < 1e-13);
            assert_eq!(oc_bessel_k(0.0, 0, 1.0, &mut v), OcStatus::Ok);
            assert!((v.value - 0.421_024_438_240_708_3).abs() < 1e-12);
            let x = [0.0, 2.0];
            assert_eq!(oc_psi0(x.as_ptr(), 2, &mut v), OcStatus::Ok);
            let k = bessel_k(Order::Real(0.0), 2.0 * (-1f64).exp()).unwrap().value;
            assert!((v.value - 2.0 * k).abs() < 1e-8 * k);
        }
    }

    #[test]
    fn errors_carry_status_and_message() {
        unsafe {
            let mut v = OcValue::default();
            assert_eq!(oc_bessel_k(0.0, 0, -1.0, &mut v), OcStatus::Domain);
            assert!(!last_error().is_empty());
            assert_eq!(oc_gamma(1.0, ptr::null_mut()), OcStatus::NullPointer);
            assert!(last_error().contains("null"));
            assert_eq!(oc_q_spectral(1.0, ptr::null(), ptr::null(), 2, &mut v), OcStatus::NullPointer);
            let x = [0.0; 6];
            assert_eq!(oc_q_spectral(1.0, x.as_ptr(), x.as_ptr(), 6, &mut v), OcStatus::Capability);
        }
    }

    #[test]
    fn densities_agree_across_routes() {
        unsafe {
            let (x, y) = ([0.0, 2.0], [0.5, 2.5]);
            let (mut a, mut b) = (OcValue::default(), OcValue::default());
            assert_eq!(oc_q_spectral(1.0, y.as_ptr(), x.as_ptr(), 2, &mut a), OcStatus::Ok);
            assert_eq!(oc_q2_factorized(1.0, y.as_ptr(), x.as_ptr(), &mut b), OcStatus::Ok);
            assert!((a.value - b.value).abs() < 1e-8 * b.value);
        }
    }

    #[test]
    fn ensemble_round_trip() {
        unsafe {
            let mut cfg = ptr::null_mut();
            assert_eq!(oc_sim_config_new(2, 0.5, 0.01, 64, 9, &mut cfg), OcStatus::Ok);
            assert_eq!(oc_sim_config_set_scheme(cfg, OcScheme::Adaptive), OcStatus::Ok);
            let x0 = [0.0, 1.0];
            let mut e = ptr::null_mut();
            assert_eq!(oc_sde_dyson(cfg, x0.as_ptr(), &mut e), OcStatus::Ok);
            let (mut len, mut n) = (0, 0);
            assert_eq!(oc_ensemble_len(e, &mut len), OcStatus::Ok);
            assert_eq!(oc_ensemble_particles(e, &mut n), OcStatus::Ok);
            assert_eq!((len, n), (64, 2));
            let mut small = [0.0; 4];
            assert_eq!(oc_ensemble_positions(e, small.as_mut_ptr(), 4), OcStatus::BufferTooSmall);
            let mut buf = vec![0.0; len * n];
            assert_eq!(oc_ensemble_positions(e, buf.as_mut_ptr(), buf.len()), OcStatus::Ok);
            assert!(buf.chunks(2).all(|p| p[0] < p[1]));
            oc_ensemble_free(e);

            let mut fk = ptr::null_mut();
            let drift = [0.0, 0.0];
            assert_eq!(oc_simulate_fk(cfg, x0.as_ptr(), drift.as_ptr(), 1.0, &mut fk), OcStatus::Ok);
            let mut w = vec![0.0; 64];
            assert_eq!(oc_ensemble_weights(fk, w.as_mut_ptr(), 64), OcStatus::Ok);
            assert!(w.iter().all(|&v| v > 0.0 && v <= 1.0));
            oc_ensemble_free(fk);
            oc_sim_config_free(cfg);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        unsafe {
            let mut cfg = ptr::null_mut();
            assert_eq!(oc_sim_config_new(2, 1.0, -0.1, 10, 1, &mut cfg), OcStatus::Config);
            assert!(cfg.is_null());
            oc_sim_config_free(ptr::null_mut());
            oc_ensemble_free(ptr::null_mut());
        }
    }
}
