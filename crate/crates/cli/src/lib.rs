//! Command-line front end for `lapcert`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 numerical
//! non-convergence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};

use lapcert::certificates::{
    assess_sbm, assess_z2sync, certify_sbm, certify_z2sync, connectivity_spectral, connectivity_unionfind,
    sufficient_condition_sbm,
};
use lapcert::ensembles::{derive_stream, planted_labels, sample_er, sample_sbm, sample_z2sync_er, sample_z2sync_gaussian};
use lapcert::experiments::{format_number, run_sweep, summary, write_csv, Grid};
use lapcert::laplacian::graph_laplacian;
use lapcert::symm_eig::{eig_all, lambda_k, SymmetricMatrix};
use lapcert::tail::{
    bernstein_bound, chernoff_degree_bound, gaussian_sigma_star, t_exact, t_montecarlo, threshold_margin,
    ThresholdQuery,
};
use lapcert::{Error, SweepConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

/// Asymmetry above which `eig` warns before symmetrizing.
const ASYM_WARN: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "lapcert", version, about = "Random Laplacian spectra and SDP tightness certificates")]
struct Cli {
    /// Master seed of all random streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Trials per grid cell (Monte Carlo draws for `tail --kind montecarlo`).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output CSV path; a `.meta.json` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file whose keys are long flag names; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo sweep over a parameter grid.
    Sweep(SweepArgs),
    /// Ratio `λmax(L) / max_i L_ii` over random Laplacians.
    Ratio(SweepArgs),
    /// Sample one instance and certify its planted solution.
    Certify(CertifyArgs),
    /// Spectrum of a symmetric matrix read from a text file.
    Eig(EigArgs),
    /// Tail probabilities, concentration bounds and threshold margins.
    Tail(TailArgs),
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// er, z2gauss, z2er, sbm, ratio or normbound.
    #[arg(long)]
    experiment: Option<String>,
    /// Grids: `start:stop:step`, a comma list, or a single value.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    sigma_scale: Option<String>,
    /// wigner-neg-laplacian, centered-er or centered-sbm.
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    rank_k: Option<usize>,
    #[arg(long)]
    tau_pos: Option<f64>,
    #[arg(long)]
    bm_grad_tol: Option<f64>,
    #[arg(long)]
    bm_max_iters: Option<usize>,
    /// Run the low-rank solver on every recovery trial.
    #[arg(long)]
    crosscheck: bool,
    /// Skip the spectral connectivity test in `er` sweeps.
    #[arg(long)]
    no_spectral: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    k_const: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    t_scale: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Model {
    Er,
    Sbm,
    Z2er,
    Z2gauss,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long, value_enum)]
    model: Model,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    sigma_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct EigArgs {
    /// First line `n`, then `n` rows of `n` whitespace-separated reals.
    file: PathBuf,
    /// Print only the `k`-th smallest eigenvalue.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TailKind {
    Margin,
    Exact,
    Montecarlo,
    Chernoff,
    Bernstein,
}

#[derive(Debug, Args)]
struct TailArgs {
    #[arg(long, value_enum, default_value = "margin")]
    kind: TailKind,
    #[arg(long, value_enum)]
    model: Option<Model>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k_const: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    t: Option<f64>,
    #[arg(long)]
    var: Option<f64>,
    #[arg(long)]
    linf: Option<f64>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match dispatch(&cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> lapcert::Result<()> {
    match &cli.command {
        Command::Sweep(a) => sweep(cli, a, None, out),
        Command::Ratio(a) => sweep(cli, a, Some("ratio"), out),
        Command::Certify(a) => certify(cli, a, out),
        Command::Eig(a) => eig(a, out, err),
        Command::Tail(a) => tail(cli, a, out),
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn load_config_file(path: &Path) -> lapcert::Result<Map<String, Value>> {
    let text = fs::read_to_string(path)?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(config_err(format!("--config {}: expected a JSON object", path.display()))),
        Err(e) => Err(config_err(format!("--config {}: {e}", path.display()))),
    }
}

fn map_set(map: &mut Map<String, Value>, key: &str, v: Value) {
    map.insert(key.to_string(), v);
}

/// Merges the config file with the flags (flags win) into a `SweepConfig`.
fn build_sweep_config(cli: &Cli, a: &SweepArgs, forced: Option<&str>) -> lapcert::Result<SweepConfig> {
    let mut map = match &cli.config {
        Some(path) => load_config_file(path)?,
        None => Map::new(),
    };
    let grids = [
        ("n", &a.n),
        ("p", &a.p),
        ("q", &a.q),
        ("rho", &a.rho),
        ("alpha", &a.alpha),
        ("beta", &a.beta),
        ("eps", &a.eps),
        ("sigma", &a.sigma),
        ("sigma-scale", &a.sigma_scale),
    ];
    for (key, raw) in grids {
        if let Some(raw) = raw {
            let grid: Grid = raw.parse().map_err(|e| config_err(format!("--{key}: {e}")))?;
            map_set(&mut map, key, serde_json::to_value(grid.0).expect("finite grid"));
        }
    }
    if let Some(e) = &a.experiment {
        map_set(&mut map, "experiment", Value::from(e.as_str()));
    }
    if let Some(e) = &a.ensemble {
        map_set(&mut map, "ensemble", Value::from(e.as_str()));
    }
    if let Some(v) = cli.seed {
        map_set(&mut map, "seed", Value::from(v));
    }
    if let Some(v) = cli.trials {
        map_set(&mut map, "trials", Value::from(v));
    }
    if let Some(v) = &cli.out {
        map_set(&mut map, "out", Value::from(v.to_string_lossy().into_owned()));
    }
    let numbers = [
        ("tau-pos", a.tau_pos),
        ("bm-grad-tol", a.bm_grad_tol),
        ("k-const", a.k_const),
        ("delta", a.delta),
        ("t-scale", a.t_scale),
    ];
    for (key, v) in numbers {
        if let Some(v) = v {
            if !v.is_finite() {
                return Err(config_err(format!("--{key} must be finite")));
            }
            map_set(&mut map, key, Value::from(v));
        }
    }
    for (key, v) in [("rank-k", a.rank_k), ("bm-max-iters", a.bm_max_iters), ("workers", a.workers)] {
        if let Some(v) = v {
            map_set(&mut map, key, Value::from(v));
        }
    }
    if a.crosscheck {
        map_set(&mut map, "crosscheck", Value::Bool(true));
    }
    if a.no_spectral {
        map_set(&mut map, "spectral", Value::Bool(false));
    }
    if let Some(exp) = forced {
        match map.get("experiment") {
            Some(Value::String(s)) if s != exp => {
                return Err(config_err(format!("--experiment {s} conflicts with the `{exp}` subcommand")));
            }
            _ => map_set(&mut map, "experiment", Value::from(exp)),
        }
    }
    if !map.contains_key("experiment") {
        return Err(config_err("--experiment is required"));
    }
    if !map.contains_key("n") {
        return Err(config_err("--n is required"));
    }
    serde_json::from_value(Value::Object(map)).map_err(|e| config_err(e.to_string()))
}

fn sweep(cli: &Cli, a: &SweepArgs, forced: Option<&str>, out: &mut dyn Write) -> lapcert::Result<()> {
    let cfg = build_sweep_config(cli, a, forced)?;
    let result = run_sweep(&cfg)?;
    out.write_all(summary(&result).as_bytes())?;
    if let Some(path) = &cfg.out {
        write_csv(&result, path)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn need<T: Copy>(v: Option<T>, flag: &str, what: &str) -> lapcert::Result<T> {
    v.ok_or_else(|| config_err(format!("--{flag} is required for {what}")))
}

/// `p` directly, or `scale · log(n) / n` from the named scale flag.
fn edge_prob(prob: (Option<f64>, &str), scale: (Option<f64>, &str), n: usize, what: &str) -> lapcert::Result<f64> {
    let ((p, pf), (s, sf)) = (prob, scale);
    match (p, s) {
        (Some(p), None) => Ok(p),
        (None, Some(s)) => Ok(s * (n as f64).ln() / n as f64),
        (Some(_), Some(_)) => Err(config_err(format!("--{pf} and --{sf} are mutually exclusive"))),
        (None, None) => Err(config_err(format!("--{pf} or --{sf} is required for {what}"))),
    }
}

fn certify(cli: &Cli, a: &CertifyArgs, out: &mut dyn Write) -> lapcert::Result<()> {
    let n = a.n;
    let seed = cli.seed.unwrap_or(0);
    let mut rng = derive_stream(seed, 0);
    let f = format_number;
    match a.model {
        Model::Er => {
            let p = edge_prob((a.p, "p"), (a.rho, "rho"), n, "er")?;
            let g = sample_er(n, p, &mut rng)?;
            let lambda2 = if n >= 2 {
                lambda_k(&graph_laplacian(&g), 2)?
            } else {
                f64::NAN
            };
            writeln!(out, "model er n {n} p {}", f(p))?;
            writeln!(out, "edges {}", g.edge_count())?;
            writeln!(out, "lambda2 {}", f(lambda2))?;
            writeln!(out, "connected_spectral {}", connectivity_spectral(&g))?;
            writeln!(out, "connected_unionfind {}", connectivity_unionfind(&g))?;
            writeln!(out, "isolated {}", g.degrees().contains(&0))?;
        }
        Model::Sbm => {
            let p = edge_prob((a.p, "p"), (a.alpha, "alpha"), n, "sbm")?;
            let q = edge_prob((a.q, "q"), (a.beta, "beta"), n, "sbm")?;
            let g = sample_sbm(n, p, q, &mut rng)?;
            let report = certify_sbm(&g)?;
            let verdict = assess_sbm(&g)?;
            let suff = sufficient_condition_sbm(&g)?;
            writeln!(out, "model sbm n {n} p {} q {}", f(p), f(q))?;
            print_report(out, report.lambda1, report.lambda2, report.tight, report.side, report.margin)?;
            writeln!(out, "oracle_block {}", verdict.oracle_block)?;
            writeln!(out, "min_stat {}", f(verdict.min_stat))?;
            writeln!(out, "sufficient {}", suff.holds)?;
        }
        Model::Z2er | Model::Z2gauss => {
            let z = planted_labels(n);
            let inst = if a.model == Model::Z2er {
                let p = edge_prob((a.p, "p"), (a.rho, "rho"), n, "z2er")?;
                let eps = need(a.eps, "eps", "z2er")?;
                sample_z2sync_er(n, p, eps, &z, &mut rng)?
            } else {
                let sigma = match (a.sigma, a.sigma_scale) {
                    (Some(s), None) => s,
                    (None, Some(c)) => c * gaussian_sigma_star(n),
                    (Some(_), Some(_)) => {
                        return Err(config_err("--sigma and --sigma-scale are mutually exclusive"))
                    }
                    (None, None) => return Err(config_err("--sigma or --sigma-scale is required for z2gauss")),
                };
                sample_z2sync_gaussian(n, sigma, &z, &mut rng)?
            };
            let report = certify_z2sync(&inst)?;
            let verdict = assess_z2sync(&inst)?;
            let name = if a.model == Model::Z2er { "z2er" } else { "z2gauss" };
            writeln!(out, "model {name} n {n}")?;
            print_report(out, report.lambda1, report.lambda2, report.tight, report.side, report.margin)?;
            writeln!(out, "oracle_block {}", verdict.oracle_block)?;
            writeln!(out, "min_stat {}", f(verdict.min_stat))?;
        }
    }
    Ok(())
}

fn print_report(
    out: &mut dyn Write,
    lambda1: f64,
    lambda2: f64,
    tight: bool,
    side: lapcert::ThresholdSide,
    margin: f64,
) -> std::io::Result<()> {
    writeln!(out, "lambda1 {}", format_number(lambda1))?;
    writeln!(out, "lambda2 {}", format_number(lambda2))?;
    writeln!(out, "tight {tight}")?;
    let side = match side {
        lapcert::ThresholdSide::Above => "above",
        lapcert::ThresholdSide::Below => "below",
        lapcert::ThresholdSide::Boundary => "boundary",
    };
    writeln!(out, "side {side}")?;
    writeln!(out, "margin {}", format_number(margin))
}

/// Reads the `eig` matrix format. Malformed contents are reported as I/O
/// errors naming the file.
pub fn read_matrix_file(path: &Path) -> lapcert::Result<(SymmetricMatrix, f64)> {
    let text = fs::read_to_string(path)?;
    let bad = |msg: String| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}: {msg}", path.display())));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let n: usize = header
        .trim()
        .parse()
        .map_err(|_| bad(format!("first line must be the dimension, got `{}`", header.trim())))?;
    let mut data = Vec::with_capacity(n * n);
    for r in 0..n {
        let line = lines.next().ok_or_else(|| bad(format!("expected {n} rows, found {r}")))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("row {}: invalid number `{t}`", r + 1))))
            .collect::<lapcert::Result<_>>()?;
        if row.len() != n {
            return Err(bad(format!("row {} has {} entries, expected {n}", r + 1, row.len())));
        }
        data.extend(row);
    }
    if lines.next().is_some() {
        return Err(bad(format!("trailing content after {n} rows")));
    }
    SymmetricMatrix::from_dense_symmetrized(n, &data).map_err(|e| bad(e.to_string()))
}

fn eig(a: &EigArgs, out: &mut dyn Write, err: &mut dyn Write) -> lapcert::Result<()> {
    let (m, asym) = read_matrix_file(&a.file)?;
    if asym > ASYM_WARN {
        writeln!(err, "warning: matrix asymmetric by up to {asym:e}; symmetrized by averaging")?;
    }
    if let Some(k) = a.k {
        let v = lambda_k(&m, k).map_err(|e| match e {
            Error::IndexOutOfRange { .. } => config_err(format!("--k: {e}")),
            e => e,
        })?;
        writeln!(out, "{}", format_number(v))?;
        return Ok(());
    }
    let spec = eig_all(&m, false)?;
    for v in &spec.eigenvalues {
        writeln!(out, "{}", format_number(*v))?;
    }
    Ok(())
}

fn tail(cli: &Cli, a: &TailArgs, out: &mut dyn Write) -> lapcert::Result<()> {
    let f = format_number;
    match a.kind {
        TailKind::Margin => {
            let model = need(a.model, "model", "--kind margin")?;
            let query = match model {
                Model::Sbm => ThresholdQuery::Sbm {
                    alpha: need(a.alpha, "alpha", "the sbm margin")?,
                    beta: need(a.beta, "beta", "the sbm margin")?,
                },
                Model::Er => ThresholdQuery::ErConnectivity {
                    rho: need(a.rho, "rho", "the er margin")?,
                },
                Model::Z2gauss => ThresholdQuery::Z2Gaussian {
                    n: need(a.n, "n", "the z2gauss margin")?,
                    sigma: need(a.sigma, "sigma", "the z2gauss margin")?,
                },
                Model::Z2er => ThresholdQuery::Z2Er {
                    n: need(a.n, "n", "the z2er margin")?,
                    p: need(a.p, "p", "the z2er margin")?,
                    eps: need(a.eps, "eps", "the z2er margin")?,
                    k: a.k_const.unwrap_or(0.0),
                    delta: a.delta.unwrap_or(0.0),
                },
            };
            writeln!(out, "margin {}", f(threshold_margin(&query)?))?;
        }
        TailKind::Exact | TailKind::Montecarlo => {
            let what = "t-exact";
            let m = need(a.m, "m", what)?;
            let p = need(a.p, "p", what)?;
            let q = need(a.q, "q", what)?;
            let delta = need(a.delta, "delta", what)?;
            let exact = t_exact(m, p, q, delta)?;
            writeln!(out, "t_exact {}", f(exact))?;
            if a.kind == TailKind::Montecarlo {
                let trials = cli.trials.unwrap_or(100_000);
                let mut rng = derive_stream(cli.seed.unwrap_or(0), 0);
                let est = t_montecarlo(m, p, q, delta, trials, &mut rng)?;
                writeln!(out, "t_montecarlo {}", f(est.estimate))?;
                writeln!(out, "std_err {}", f(est.std_err))?;
            }
        }
        TailKind::Chernoff => {
            let what = "the chernoff bound";
            let bound = chernoff_degree_bound(need(a.n, "n", what)?, need(a.rho, "rho", what)?, need(a.t, "t", what)?)?;
            writeln!(out, "chernoff {}", f(bound))?;
        }
        TailKind::Bernstein => {
            let what = "the bernstein bound";
            let bound = bernstein_bound(
                need(a.t, "t", what)?,
                need(a.m, "m", what)?,
                need(a.var, "var", what)?,
                need(a.linf, "linf", what)?,
            )?;
            writeln!(out, "bernstein {}", f(bound))?;
        }
    }
    Ok(())
}
