//! The `oconnell` command line: `fn`, `density`, `simulate` and `verify`.
//!
//! A JSON config file (`--config`) may hold any long flag as a key; flags on
//! the command line win over the file, which wins over defaults. Every output
//! carries `format_version` and the resolved configuration.

mod table;

use crate::densities::{
    conditioned_density_t, drift_density, from_minus_infinity, heat_kernel, km_density, my_q, noncolliding_density,
    oconnell_density, q2_factorized, q_spectral, q_spectral_mc, survival_n, theta_n, DensityEstimate, DriftVector,
    FromMinusInfinity,
};
use crate::error::{Error, Result};
use crate::pathsim::stats::{mean, quantile, variance, Histogram, McEstimate};
use crate::pathsim::{
    my_drift, my_explicit, scaling_limit_check, sde_dyson, sde_my, sde_oconnell, simulate_fk, KillMode, PathEnsemble,
    Potential, Scheme, SimConfig,
};
use crate::quad::QuadratureSpec;
use crate::specfun::{bessel_i_any, bessel_j0, bessel_k, bessel_k_deriv, gamma, theta, Order};
use crate::verify::{run_suite, Suite};
use crate::whittaker::{drift_field, psi, psi0};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;
use std::ffi::OsString;
use std::path::PathBuf;
use table::{Cell, Table};

pub const FORMAT_VERSION: u32 = 1;
/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "OCONNELL_THREADS";

#[derive(Debug, Parser, Serialize)]
#[command(name = "oconnell", version, about = "Brownian motions killed by a quantum Toda potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON file whose keys are long flag names.
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,

    /// Write an (x, y) series for plotting.
    #[arg(long, global = true)]
    emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
enum Command {
    /// Evaluate a special function.
    Fn(FnArgs),
    /// Evaluate a transition density or survival probability.
    Density(DensityArgs),
    /// Simulate an ensemble and summarize its terminal law.
    Simulate(SimArgs),
    /// Run acceptance checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum FnName {
    Gamma,
    J0,
    Besseli,
    Besselk,
    BesselkDeriv,
    Theta,
    Psi,
    Psi0,
    Drift,
}

#[derive(Debug, Args, Serialize)]
struct FnArgs {
    #[arg(value_enum)]
    name: FnName,
    /// Argument; a comma-separated configuration for psi, psi0 and drift.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x: Vec<f64>,
    /// Bessel order.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    order: f64,
    /// Use the imaginary order i*order in besselk.
    #[arg(long)]
    imag_order: bool,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Number of particles; checked against the length of --x.
    #[arg(long)]
    n: Option<usize>,
    /// Spectral parameter of psi (λ = iν).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    nu: Vec<f64>,
    /// Drift of the one-particle drift function.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum DensityName {
    Heat,
    Km,
    Noncolliding,
    Q,
    Qmu,
    Myq,
    Survival,
    Conditioned,
    Oconnell,
    ThetaN,
    FromMinusInf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum Route {
    Factorized,
    Spectral,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum Horizon {
    Finite,
    Infinite,
}

#[derive(Debug, Args, Serialize)]
struct DensityArgs {
    #[arg(value_enum)]
    name: DensityName,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    t: f64,
    /// Start (for survival: the point whose survival is computed).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    y: Vec<f64>,
    /// Drift vector; zero by default.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    mu: Vec<f64>,
    /// Kernel route for q and qmu; factorized for N = 2, spectral otherwise.
    #[arg(long, value_enum)]
    route: Option<Route>,
    /// Start time of the conditioned density.
    #[arg(long, default_value_t = 0.0)]
    s: f64,
    /// Conditioning horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, value_enum, default_value_t = Horizon::Infinite)]
    mode: Horizon,
    /// Monte Carlo samples for --route mc.
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    /// Grid over y (one particle).
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum Model {
    Fk,
    MyExplicit,
    SdeOconnell,
    SdeDyson,
    SdeMy,
    ScalingLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum SchemeArg {
    Euler,
    TamedEuler,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
enum KillArg {
    Weighted,
    Bernoulli,
}

#[derive(Debug, Args, Serialize)]
struct SimArgs {
    #[arg(value_enum)]
    model: Model,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    /// Start; ignored by my_explicit, which starts at -infinity.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Euler)]
    scheme: SchemeArg,
    #[arg(long, value_enum, default_value_t = KillArg::Weighted)]
    kill_mode: KillArg,
    /// Drift: a velocity per particle for fk, a scalar for my_explicit/sde_my.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    mu: Vec<f64>,
    /// Wall sharpness for fk, or the list of ε for scaling_limit.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Write every terminal configuration with its weight.
    #[arg(long)]
    dump_samples: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(long, default_value = "all")]
    suite: String,
    /// Deterministic quadrature checks only.
    #[arg(long)]
    fast: bool,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

struct Outcome {
    text: String,
    code: i32,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Capability(_) | Error::Config(_) => 2,
        Error::Convergence { .. } | Error::Integration(_) | Error::Estimation(_) => 3,
    }
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Convergence { .. } => "convergence",
        Error::Capability(_) => "capability",
        Error::Estimation(_) => "estimation",
        Error::Integration(_) => "integration",
        Error::Config(_) => "config",
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let argv: Vec<OsString> = args.into_iter().collect();
    let json_errors = wants_json(&argv);
    let fail = |e: Error| {
        if json_errors {
            let v = serde_json::json!({"error": {"kind": kind(&e), "message": e.to_string()}});
            println!("{v}");
        } else {
            eprintln!("error: {e}");
        }
        exit_code(&e)
    };
    let argv = match merge_config(argv) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_threads() {
        return fail(e);
    }
    match execute(&cli) {
        Ok(out) => match &cli.out {
            Some(p) => match std::fs::write(p, &out.text) {
                Ok(()) => out.code,
                Err(e) => fail(Error::Config(format!("cannot write {}: {e}", p.display()))),
            },
            None => {
                print!("{}", out.text);
                out.code
            }
        },
        Err(e) => fail(e),
    }
}

/// Runs a command (without the program name) and returns what it would
/// print. `--out` is ignored; side files are still written.
pub fn render<I, T>(args: I) -> Result<String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let mut argv: Vec<OsString> = vec!["oconnell".into()];
    argv.extend(args.into_iter().map(Into::into));
    let argv = merge_config(argv)?;
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::Config(e.to_string()))?;
    Ok(execute(&cli)?.text)
}

fn wants_json(argv: &[OsString]) -> bool {
    argv.windows(2).any(|w| w[0] == "--format" && w[1] == "json") || argv.iter().any(|a| a == "--format=json")
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
    if n == 0 {
        return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
    }
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Appends `--key value` for every config key not given as a flag.
fn merge_config(mut argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.to_string_lossy())))?;
    let obj: serde_json::Map<String, Value> =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config is not a JSON object: {e}")))?;
    let given = |flag: &str| {
        argv.iter().any(|a| {
            let s = a.to_string_lossy();
            s == flag || s.starts_with(&format!("{flag}="))
        })
    };
    let mut extra: Vec<OsString> = Vec::new();
    for (key, value) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        if key == "config" || given(&flag) {
            continue;
        }
        match value {
            Value::Bool(true) => extra.push(flag.into()),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(scalar).collect::<Result<_>>()?;
                extra.push(format!("{flag}={}", parts.join(",")).into());
            }
            v => extra.push(format!("{flag}={}", scalar(&v)?).into()),
        }
    }
    argv.extend(extra);
    Ok(argv)
}

fn scalar(v: &Value) -> Result<String> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        _ => Err(Error::Config(format!("config value {v} is not a number or string"))),
    }
}

/// Points of a grid `--from --to --steps`, or the given values.
fn grid(from: Option<f64>, to: Option<f64>, steps: Option<usize>, given: &[f64], what: &str) -> Result<Vec<f64>> {
    match (from, to, steps) {
        (None, None, None) => {
            if given.is_empty() {
                Err(Error::Config(format!("--{what} is required")))
            } else {
                Ok(given.to_vec())
            }
        }
        (Some(a), Some(b), Some(n)) if n >= 1 && a.is_finite() && b.is_finite() => {
            if n == 1 {
                return Ok(vec![a]);
            }
            Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
        }
        _ => Err(Error::Config("a grid needs --from, --to and --steps >= 1".into())),
    }
}

fn need(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("--{what} is required")))
}

fn check_n(n: Option<usize>, x: &[f64]) -> Result<()> {
    match n {
        Some(n) if n != x.len() => Err(Error::Config(format!("--n {n} but --x has {} entries", x.len()))),
        _ => Ok(()),
    }
}

fn cmd_fn(a: &FnArgs) -> Result<Table> {
    let mut t;
    match a.name {
        FnName::Gamma | FnName::J0 | FnName::Besseli | FnName::Besselk | FnName::BesselkDeriv => {
            let order = if a.imag_order { Order::Imaginary(a.order) } else { Order::Real(a.order) };
            let with_order = !matches!(a.name, FnName::Gamma | FnName::J0);
            let mut cols = vec![];
            if with_order {
                cols.push("order");
            }
            cols.extend(["x", "value", "error_bound"]);
            t = Table::new(&cols);
            for x in grid(a.from, a.to, a.steps, &a.x, "x")? {
                let v = match a.name {
                    FnName::Gamma => gamma(x)?,
                    FnName::J0 => bessel_j0(x)?,
                    FnName::Besseli => bessel_i_any(a.order, x)?,
                    FnName::Besselk => bessel_k(order, x)?,
                    _ => bessel_k_deriv(order, x)?,
                };
                let mut row = vec![];
                if with_order {
                    row.push(Cell::Num(a.order));
                }
                row.extend([Cell::Num(x), Cell::Num(v.value), Cell::Num(v.error_bound)]);
                t.push(row);
            }
        }
        FnName::Theta => {
            let r = need(a.r, "r")?;
            let given: Vec<f64> = a.t.into_iter().collect();
            t = Table::new(&["r", "t", "value", "error_bound"]);
            for time in grid(a.from, a.to, a.steps, &given, "t")? {
                let v = theta(r, time)?;
                t.push(vec![Cell::Num(r), Cell::Num(time), Cell::Num(v.value), Cell::Num(v.error_bound)]);
            }
        }
        FnName::Psi => {
            check_n(a.n, &a.x)?;
            let v = psi(&a.nu, &a.x, &QuadratureSpec::default())?;
            let mut cols: Vec<String> = (1..=a.nu.len()).map(|j| format!("nu_{j}")).collect();
            cols.extend((1..=a.x.len()).map(|j| format!("x_{j}")));
            cols.extend(["value_re", "value_im", "error_bound"].map(String::from));
            t = Table::new(&cols);
            let mut row: Vec<Cell> = a.nu.iter().chain(&a.x).map(|&v| Cell::Num(v)).collect();
            row.extend([Cell::Num(v.value.re), Cell::Num(v.value.im), Cell::Num(v.error_bound)]);
            t.push(row);
        }
        FnName::Psi0 => {
            check_n(a.n, &a.x)?;
            let v = psi0(&a.x, &QuadratureSpec::default())?;
            let mut cols: Vec<String> = (1..=a.x.len()).map(|j| format!("x_{j}")).collect();
            cols.extend(["value", "error_bound"].map(String::from));
            t = Table::new(&cols);
            let mut row: Vec<Cell> = a.x.iter().map(|&v| Cell::Num(v)).collect();
            row.extend([Cell::Num(v.value), Cell::Num(v.error_bound)]);
            t.push(row);
        }
        FnName::Drift => {
            check_n(a.n, &a.x)?;
            if a.x.len() <= 1 || a.from.is_some() {
                // one particle in the potential e^{-2x}/2 with drift mu
                t = Table::new(&["mu", "x", "value", "error_bound"]);
                for x in grid(a.from, a.to, a.steps, &a.x, "x")? {
                    let v = my_drift(x, a.mu)?;
                    t.push(vec![Cell::Num(a.mu), Cell::Num(x), Cell::Num(v), Cell::Num(f64::NAN)]);
                }
            } else {
                let f = drift_field(&a.x)?;
                let mut cols: Vec<String> = (1..=a.x.len()).map(|j| format!("x_{j}")).collect();
                cols.extend(["component", "value", "error_bound"].map(String::from));
                t = Table::new(&cols);
                for (j, v) in f.iter().enumerate() {
                    let mut row: Vec<Cell> = a.x.iter().map(|&v| Cell::Num(v)).collect();
                    row.extend([Cell::Int(j as u64 + 1), Cell::Num(*v), Cell::Num(f64::NAN)]);
                    t.push(row);
                }
            }
        }
    }
    Ok(t)
}


fn method_name(e: &DensityEstimate) -> String {
    match serde_json::to_value(e.method) {
        Ok(Value::String(s)) => s,
        _ => String::new(),
    }
}

fn cmd_density(a: &DensityArgs, seed: u64) -> Result<Table> {
    let spec = QuadratureSpec::new(1e-300, a.rel_tol);
    spec.validate()?;
    let n = a.n.unwrap_or(if a.x.is_empty() { a.y.len() } else { a.x.len() }).max(1);
    let x = &a.x;
    let starts_at_x = !matches!(a.name, DensityName::ThetaN | DensityName::FromMinusInf);
    if starts_at_x && x.len() != n {
        return Err(Error::Config(format!("--x needs {n} entries, got {}", x.len())));
    }
    let has_y = a.name != DensityName::Survival;
    let ys: Vec<Vec<f64>> = if a.from.is_some() || a.to.is_some() || a.steps.is_some() {
        if n != 1 {
            return Err(Error::Config("a y grid needs one particle".into()));
        }
        grid(a.from, a.to, a.steps, &[], "y")?.into_iter().map(|y| vec![y]).collect()
    } else {
        vec![a.y.clone()]
    };
    let mu = if a.mu.is_empty() { vec![0.0; n] } else { a.mu.clone() };
    let route = a.route.unwrap_or(if n == 2 { Route::Factorized } else { Route::Spectral });
    let q = |t: f64, y: &[f64], x: &[f64]| match route {
        Route::Factorized => q2_factorized(t, y, x),
        Route::Spectral => q_spectral(t, y, x, &spec),
        Route::Mc => q_spectral_mc(t, y, x, a.paths, seed),
    };
    let quad = |v: crate::quad::ErrorBounded| DensityEstimate::quadrature(v.value, v.error_bound);
    let one = |v: &[f64], what: &str| -> Result<f64> {
        match v {
            [a] => Ok(*a),
            _ => Err(Error::Config(format!("--{what} needs one entry for this density"))),
        }
    };

    let mut cols = vec!["t".to_string()];
    if starts_at_x {
        cols.extend((1..=n).map(|j| format!("x_{j}")));
    }
    if has_y {
        cols.extend((1..=n).map(|j| format!("y_{j}")));
    }
    cols.extend(["value", "error_bound", "method"].map(String::from));
    let mut table = Table::new(&cols);
    let t = a.t;
    for y in &ys {
        if has_y && y.len() != n {
            return Err(Error::Config(format!("--y needs {n} entries, got {}", y.len())));
        }
        let est = match a.name {
            DensityName::Heat => {
                let v = x.iter().zip(y).map(|(a, b)| heat_kernel(t, *b, *a)).product::<Result<f64>>()?;
                DensityEstimate::closed_form(v)
            }
            DensityName::Km => DensityEstimate::closed_form(km_density(t, y, x)?),
            DensityName::Noncolliding => DensityEstimate::closed_form(noncolliding_density(t, y, x)?),
            DensityName::Q => q(t, y, x)?,
            DensityName::Qmu => drift_density(t, y, x, &DriftVector::new(mu.clone())?, |t, y, x| q(t, y, x))?,
            DensityName::Myq => my_q(t, one(y, "y")?, one(x, "x")?, one(&mu, "mu")?)?,
            DensityName::Survival => quad(survival_n(t, x, &mu, &spec)?),
            DensityName::Conditioned => {
                conditioned_density_t(a.s, t, need(a.horizon, "horizon")?, y, x, &mu, &spec)?
            }
            DensityName::Oconnell => oconnell_density(t, y, x)?,
            DensityName::ThetaN => quad(theta_n(t, y, &spec)?),
            DensityName::FromMinusInf => {
                let mode = match a.mode {
                    Horizon::Finite => FromMinusInfinity::FiniteT { horizon: need(a.horizon, "horizon")? },
                    Horizon::Infinite => FromMinusInfinity::InfiniteT,
                };
                quad(from_minus_infinity(mode, t, one(y, "y")?, one(&mu, "mu")?)?)
            }
        };
        let mut row = vec![Cell::Num(t)];
        if starts_at_x {
            row.extend(x.iter().map(|&v| Cell::Num(v)));
        }
        if has_y {
            row.extend(y.iter().map(|&v| Cell::Num(v)));
        }
        row.extend([Cell::Num(est.value), Cell::Num(est.error_bound), Cell::Text(method_name(&est))]);
        table.push(row);
    }
    Ok(table)
}

/// Weighted p-quantile; type 7 when all weights are one.
fn weighted_quantile(x: &[f64], w: &[f64], p: f64) -> f64 {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    if w.iter().all(|&v| v == 1.0) {
        let sorted: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        return quantile(&sorted, p);
    }
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for &i in &idx {
        acc += w[i];
        if acc >= p * total {
            return x[i];
        }
    }
    idx.last().map_or(f64::NAN, |&i| x[i])
}

const QUANTILES: [(f64, &str); 5] = [(0.05, "q05"), (0.25, "q25"), (0.5, "q50"), (0.75, "q75"), (0.95, "q95")];

fn summarize(t: &mut Table, e: &PathEnsemble) {
    let w = &e.weights;
    let total: f64 = w.iter().sum();
    let total_sq: f64 = w.iter().map(|v| v * v).sum();
    let n_eff = if total_sq > 0.0 { total * total / total_sq } else { 0.0 };
    for j in 0..e.n_particles {
        let x = e.coordinate(j);
        let (m, v) = if w.iter().all(|&v| v == 1.0) {
            (mean(&x), variance(&x))
        } else {
            let m = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
            let v = x.iter().zip(w).map(|(a, b)| b * (a - m) * (a - m)).sum::<f64>() / total;
            (m, v)
        };
        let idx = j as u64 + 1;
        t.push(vec![Cell::text("mean"), Cell::Int(idx), Cell::Num(m), Cell::Num((v / n_eff).sqrt())]);
        t.push(vec![Cell::text("variance"), Cell::Int(idx), Cell::Num(v), Cell::Num(f64::NAN)]);
        for (p, name) in QUANTILES {
            t.push(vec![Cell::text(name), Cell::Int(idx), Cell::Num(weighted_quantile(&x, w, p)), Cell::Num(f64::NAN)]);
        }
    }
}

fn estimate_row(t: &mut Table, name: &str, idx: u64, m: &McEstimate) {
    t.push(vec![Cell::text(name), Cell::Int(idx), Cell::Num(m.value), Cell::Num(m.std_error)]);
}

struct Simulated {
    table: Table,
    samples: PathEnsemble,
}

fn cmd_simulate(a: &SimArgs, seed: u64) -> Result<Simulated> {
    let one_particle = matches!(a.model, Model::MyExplicit | Model::SdeMy);
    let n = a.n.unwrap_or(if one_particle { 1 } else { a.x.len() });
    if one_particle && n != 1 {
        return Err(Error::Config(format!("{:?} is a one-particle model", a.model)));
    }
    let scheme = match a.scheme {
        SchemeArg::Euler => Scheme::Euler,
        SchemeArg::TamedEuler => Scheme::TamedEuler,
        SchemeArg::Adaptive => Scheme::Adaptive,
    };
    let kill = match a.kill_mode {
        KillArg::Weighted => KillMode::Weighted,
        KillArg::Bernoulli => KillMode::Bernoulli,
    };
    let cfg = SimConfig::new(n, a.t, a.dt, a.paths, seed)?.with_scheme(scheme).with_kill_mode(kill);
    let start = || -> Result<&[f64]> {
        if a.x.len() == n {
            Ok(&a.x)
        } else {
            Err(Error::Config(format!("--x needs {n} entries, got {}", a.x.len())))
        }
    };
    let scalar_mu = || match a.mu.as_slice() {
        [] => Ok(0.0),
        [m] => Ok(*m),
        _ => Err(Error::Config("--mu takes one value for this model".into())),
    };
    let mut table = Table::new(&["quantity", "index", "value", "std_error"]);
    let samples = match a.model {
        Model::Fk => {
            let mu = if a.mu.is_empty() { vec![0.0; n] } else { a.mu.clone() };
            let pot = match a.eps.as_slice() {
                [] => Potential::toda(),
                [e] => Potential::Toda { eps: *e },
                _ => return Err(Error::Config("--eps takes one value for fk".into())),
            };
            let e = simulate_fk(&cfg, start()?, &mu, pot)?;
            estimate_row(&mut table, "survival", 0, &e.survival()?);
            e
        }
        Model::MyExplicit => {
            let z = my_explicit(&cfg, scalar_mu()?)?;
            let rows = z.into_iter().map(|v| (vec![v], 1.0)).collect();
            PathEnsemble::from_rows(1, rows)
        }
        Model::SdeOconnell => sde_oconnell(&cfg, start()?)?,
        Model::SdeMy => sde_my(&cfg, start()?[0], scalar_mu()?)?,
        Model::SdeDyson => {
            let e = sde_dyson(&cfg, start()?)?;
            for j in 0..n.saturating_sub(1) {
                let g2: Vec<f64> = e.gaps(j).iter().map(|g| g * g).collect();
                estimate_row(&mut table, "gap2_mean", j as u64 + 1, &McEstimate::from_samples(&g2)?);
            }
            e
        }
        Model::ScalingLimit => {
            let eps = if a.eps.is_empty() { vec![0.2, 0.1, 0.05] } else { a.eps.clone() };
            let rep = scaling_limit_check(&eps, &cfg, start()?)?;
            for (i, (e, ks)) in rep.eps.iter().zip(&rep.ks).enumerate() {
                table.push(vec![Cell::text("eps"), Cell::Int(i as u64 + 1), Cell::Num(*e), Cell::Num(f64::NAN)]);
                table.push(vec![Cell::text("ks"), Cell::Int(i as u64 + 1), Cell::Num(*ks), Cell::Num(f64::NAN)]);
            }
            let flag = f64::from(u8::from(rep.monotone));
            table.push(vec![Cell::text("monotone"), Cell::Int(0), Cell::Num(flag), Cell::Num(f64::NAN)]);
            // the Dyson ensemble the comparison was made against
            sde_dyson(&cfg, start()?)?
        }
    };
    summarize(&mut table, &samples);
    Ok(Simulated { table, samples })
}

fn sample_table(e: &PathEnsemble) -> Table {
    let mut cols = vec!["path_id".to_string()];
    cols.extend((1..=e.n_particles).map(|j| format!("x_{j}")));
    cols.push("weight".into());
    let mut t = Table::new(&cols);
    for i in 0..e.len() {
        let mut row = vec![Cell::Int(i as u64)];
        row.extend(e.position(i).iter().map(|&v| Cell::Num(v)));
        row.push(Cell::Num(e.weights[i]));
        t.push(row);
    }
    t
}

/// Kernel density of the first coordinate, weighted by survival.
fn sample_plot(e: &PathEnsemble) -> Result<Table> {
    let x = e.coordinate(0);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = 0.05 * (hi - lo).max(1e-12);
    let h = Histogram::kde(&x, Some(&e.weights), lo - pad, hi + pad, 200, None)?;
    let mut t = Table::new(&["x", "y"]);
    for (c, d) in h.centres().into_iter().zip(h.density()) {
        t.push(vec![Cell::Num(c), Cell::Num(d)]);
    }
    Ok(t)
}

/// (argument, value) from a fn or density table; the argument is the
/// column just before `value`.
fn table_plot(t: &Table) -> Result<Table> {
    let v = t.column("value").ok_or_else(|| Error::Config("no value column to plot".into()))?;
    let arg = v.checked_sub(1).ok_or_else(|| Error::Config("no argument column to plot".into()))?;
    let mut out = Table::new(&["x", "y"]);
    for row in t.rows() {
        out.push(vec![row[arg].clone(), row[v].clone()]);
    }
    Ok(out)
}

fn cmd_verify(a: &VerifyArgs) -> Result<(Table, i32, Value)> {
    let suite: Suite = a.suite.parse()?;
    let report = run_suite(suite, a.fast, |r| {
        let status = if r.passed { "PASS" } else { "FAIL" };
        eprintln!("[{status}] {:>2} {} ({:.1} s)", r.id, r.title, r.wall_time_s);
    });
    let mut t = Table::new(&[
        "criterion",
        "check",
        "computed",
        "expected",
        "tolerance",
        "passed",
        "wall_time_s",
        "known_failure",
    ]);
    for r in &report.criteria {
        for c in &r.checks {
            t.push(vec![
                Cell::Int(u64::from(r.id)),
                Cell::Text(c.name.clone()),
                Cell::Num(c.computed),
                Cell::Num(c.expected),
                Cell::Num(c.tolerance),
                Cell::Int(u64::from(c.passed)),
                Cell::Num(c.wall_time_s),
                Cell::Text(r.known_failure.clone().unwrap_or_default()),
            ]);
        }
    }
    let value = serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?;
    Ok((t, if report.passed { 0 } else { 1 }, value))
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let config = serde_json::to_value(cli).map_err(|e| Error::Config(e.to_string()))?;
    let mut report = None;
    let mut code = 0;
    let (table, plot) = match &cli.command {
        Command::Fn(a) => {
            let t = cmd_fn(a)?;
            let p = table_plot(&t);
            (t, p)
        }
        Command::Density(a) => {
            let t = cmd_density(a, cli.seed)?;
            let p = table_plot(&t);
            (t, p)
        }
        Command::Simulate(a) => {
            let s = cmd_simulate(a, cli.seed)?;
            if let Some(p) = &a.dump_samples {
                write_file(p, &sample_table(&s.samples).csv(&config))?;
            }
            let p = sample_plot(&s.samples);
            (s.table, p)
        }
        Command::Verify(a) => {
            let (t, c, r) = cmd_verify(a)?;
            if let Some(p) = &a.report {
                let doc = serde_json::json!({"format_version": FORMAT_VERSION, "config": config, "report": r});
                write_file(p, &format!("{doc:#}\n"))?;
            }
            code = c;
            report = Some(r);
            let p = Err(Error::Config("verify has no plot data".into()));
            (t, p)
        }
    };
    if let Some(p) = &cli.emit_plot_data {
        write_file(p, &plot?.csv(&config))?;
    }
    let text = match cli.format {
        Format::Csv => table.csv(&config),
        Format::Json => table.json(&config, report),
    };
    Ok(Outcome { text, code })
}

fn write_file(p: &PathBuf, text: &str) -> Result<()> {
    std::fs::write(p, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn value(out: &str) -> f64 {
        let line = out.lines().find(|l| !l.starts_with('#')).and_then(|_| out.lines().last()).unwrap();
        let header: Vec<&str> = out.lines().find(|l| !l.starts_with('#')).unwrap().split(',').collect();
        let i = header.iter().position(|h| *h == "value").unwrap();
        line.split(',').nth(i).unwrap().parse().unwrap()
    }

    #[test]
    fn examples() {
        let k = value(&render(["fn", "besselk", "--order", "0", "--x", "1"]).unwrap());
        assert!((k - 0.421_024_438_240_708_3).abs() < 1e-10);
        let g = value(&render(["fn", "gamma", "--x", "4"]).unwrap());
        assert!((g - 6.0).abs() < 1e-13);
        let h = value(&render(["density", "heat", "--t", "1", "--x", "0", "--y", "0"]).unwrap());
        assert!((h - 0.398_942_280_401_432_7).abs() < 1e-12);
        let p = value(&render(["fn", "psi0", "--n", "2", "--x", "0,2"]).unwrap());
        let k = bessel_k(Order::Real(0.0), 2.0 * (-1f64).exp()).unwrap().value;
        assert!((p - 2.0 * k).abs() < 1e-8 * k, "{p}");
    }

    #[test]
    fn csv_layout() {
        let out = render(["fn", "gamma", "--from", "1", "--to", "3", "--steps", "3"]).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "# format_version=1");
        assert!(lines[1].starts_with("# config={"));
        assert_eq!(lines[2], "x,value,error_bound");
        assert_eq!(lines.len(), 6);
        // 17 significant digits
        assert!(lines[5].starts_with("3.0000000000000000e0,2.0000000000000000e0,"), "{}", lines[5]);
    }

    #[test]
    fn json_echoes_config() {
        let out = render(["--format", "json", "density", "km", "--t", "1", "--x", "0,1", "--y", "0,1"]).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["config"]["command"]["density"]["t"], 1.0);
        assert_eq!(v["columns"][0], "t");
    }

    #[test]
    fn usage_errors() {
        assert!(matches!(render(["fn", "nosuch"]), Err(Error::Config(_))));
        assert!(matches!(render(["fn", "gamma", "--from", "1"]), Err(Error::Config(_))));
        assert_eq!(exit_code(&render(["fn", "gamma", "--x", "-1"]).unwrap_err()), 2);
        assert_eq!(run(["oconnell", "fn", "gamma"].map(OsString::from)), 2);
    }

    #[test]
    fn config_file_and_precedence() {
        let dir = std::env::temp_dir().join(format!("oconnell-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("c.json");
        std::fs::write(&cfg, r#"{"x": 1, "order": 1}"#).unwrap();
        let c = cfg.to_str().unwrap();
        let from_file = value(&render(["fn", "besselk", "--config", c]).unwrap());
        assert!((from_file - bessel_k(Order::Real(1.0), 1.0).unwrap().value).abs() < 1e-14);
        let flag = value(&render(["fn", "besselk", "--config", c, "--x", "2"]).unwrap());
        assert!((flag - bessel_k(Order::Real(1.0), 2.0).unwrap().value).abs() < 1e-14);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn simulate_repeats_exactly() {
        let args = ["simulate", "fk", "--x", "0,2", "--paths", "200", "--dt", "0.01", "--seed", "3"];
        let a = render(args).unwrap();
        assert_eq!(a, render(args).unwrap());
        assert!(a.contains("survival,0,"));
        assert_ne!(a, render(["simulate", "fk", "--x", "0,2", "--paths", "200", "--dt", "0.01", "--seed", "4"]).unwrap());
    }

    #[test]
    fn weighted_quantile_matches_repetition() {
        let x = [1.0, 2.0, 3.0];
        let w = [1.0, 0.0, 3.0];
        assert_eq!(weighted_quantile(&x, &w, 0.2), 1.0);
        assert_eq!(weighted_quantile(&x, &w, 0.5), 3.0);
    }
}
