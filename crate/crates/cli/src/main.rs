//! `fano-balance`: exact invariants, balanced metrics and slope measurements
//! for toric Fano test configurations.
//!
//! Exit codes: 0 on success, 2 when a check fails, 1 on errors.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fano_balance::analysis::quadrature::QuadratureSpec;
use fano_balance::balanced::{donaldson_iterate, lower_bound_check, slope_at_infinity, time_grid, z_limit};
use fano_balance::error::{Error, Result};
use fano_balance::functionals::{fs, m_matrix, ding_derivative, DiagonalHermitian, FunctionalContext};
use fano_balance::invariants::{chow_df_limit, higher_futaki, p_norm, InvariantReport};
use fano_balance::io::{read_metric, read_test_config, resolve_polytope, write_json, HermitianFile};
use fano_balance::lattice::LatticePolytope;
use fano_balance::rational::format_rational;
use fano_balance::testconfig::ToricTestConfig;
use fano_balance::verify::{verify_all, Profile, VerifyOptions};

const THREADS_ENV: &str = "FANO_BALANCE_THREADS";

#[derive(Parser)]
#[command(name = "fano-balance", version, about = "Quantized Ding functionals and balanced metrics on toric Fano manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact DF, Chow and quantized Futaki invariants of a test configuration.
    Invariants(InvariantsArgs),
    /// Run the Donaldson fixed-point iteration from the identity metric.
    Balance(BalanceArgs),
    /// Functional values along the Bergman ray of a configuration, as CSV.
    Functionals(FunctionalsArgs),
    /// Ding slope and balancing energy along the Bergman ray.
    Slope(SlopeArgs),
    /// Check the L^q lower bound on the Kahler-Einstein defect.
    Lowerbound(LowerboundArgs),
    /// Run every acceptance check and write a verification report.
    VerifyAll(VerifyArgs),
    /// List the builtin polytopes.
    ListBuiltins(OutArgs),
}

#[derive(Args)]
struct OutArgs {
    /// Write JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InvariantsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Even exponent of the configuration norm.
    #[arg(long, default_value_t = 2)]
    p: u32,
    /// Length of the rescaled Chow sequence km Chow_km.
    #[arg(long, default_value_t = 12)]
    m_max: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BalanceArgs {
    #[arg(long)]
    polytope: String,
    #[arg(long)]
    k: u32,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Start from this metric instead of the identity.
    #[arg(long)]
    h: Option<PathBuf>,
    /// Also write the iteration trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Include wall-clock time in the trace.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct FunctionalsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Base metric; defaults to the identity.
    #[arg(long)]
    h: Option<PathBuf>,
    /// `start:stop:step`.
    #[arg(long, default_value = "0:40:2")]
    t_grid: String,
    /// CSV destination; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SlopeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    h: Option<PathBuf>,
    #[arg(long, default_value_t = 40.0)]
    t_max: f64,
    #[arg(long, default_value_t = 2.0)]
    step: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct LowerboundArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    h: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    p: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Default profile.
    #[arg(long, conflicts_with = "full")]
    quick: bool,
    /// Refined quadrature throughout.
    #[arg(long)]
    full: bool,
    /// Record the total runtime (makes reports non-reproducible).
    #[arg(long)]
    timings: bool,
    /// Negative control: flip every weight sign.
    #[arg(long, hide = true)]
    corrupt_weight_sign: bool,
    #[command(flatten)]
    out: OutArgs,
}

enum Outcome {
    Ok,
    CheckFailed,
}

/// Writes to standard output, treating a closed pipe as success.
fn print_stdout(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => print_stdout(&serde_json::to_string_pretty(value)?),
    }
}

fn metric_or_identity(path: &Option<PathBuf>, tc: &ToricTestConfig) -> Result<DiagonalHermitian> {
    match path {
        Some(p) => read_metric(p),
        None => Ok(DiagonalHermitian::identity(tc.polytope().clone(), tc.k())),
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad time grid `{s}`"))))
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(Error::Parse(format!("time grid `{s}` must be start:stop:step")));
    };
    if step.is_nan() || step <= 0.0 || stop < start {
        return Err(Error::Parse(format!("time grid `{s}` is empty")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

#[derive(Serialize)]
struct InvariantsOutput {
    #[serde(flatten)]
    report: InvariantReport,
    weight_denominator: String,
    p: u32,
    p_norm_leading: Option<String>,
    p_norm: Option<f64>,
    /// `km Chow_km` for `m = 1..m_max`.
    rescaled_chow: Vec<String>,
    higher_futaki: Option<Vec<String>>,
}

fn invariants(args: &InvariantsArgs) -> Result<Outcome> {
    let tc = read_test_config(&args.config)?;
    let report = InvariantReport::compute(&tc)?;
    let norm = match p_norm(&tc, args.p) {
        Ok(n) => Some(n),
        Err(Error::DegenerateNorm { .. }) => None,
        Err(e) => return Err(e),
    };
    let rescaled_chow = (1..=args.m_max)
        .map(|m| chow_df_limit(&tc, m).map(|v| format_rational(&v)))
        .collect::<Result<_>>()?;
    let higher = if tc.is_product() {
        Some((1..=tc.polytope().dim()).map(|p| higher_futaki(&tc, p).map(|v| format_rational(&v))).collect::<Result<_>>()?)
    } else {
        None
    };
    let out = InvariantsOutput {
        weight_denominator: tc.weight_denominator().to_string(),
        p: args.p,
        p_norm_leading: norm.as_ref().map(|n| format_rational(&n.leading)),
        p_norm: norm.map(|n| n.value),
        rescaled_chow,
        higher_futaki: higher,
        report,
    };
    emit(&args.out.out, &out)?;
    Ok(Outcome::Ok)
}

fn balance(args: &BalanceArgs) -> Result<Outcome> {
    let polytope = resolve_polytope(&args.polytope, None)?;
    let ctx = FunctionalContext::new(polytope.clone(), args.k)?;
    let init = match &args.h {
        Some(p) => read_metric(p)?,
        None => DiagonalHermitian::identity(polytope.clone(), args.k),
    };
    let spec = QuadratureSpec::new(polytope.dim());
    let (h, mut trace, outcome) = match donaldson_iterate(&ctx, &init, args.tol, args.max_iter, &spec) {
        Ok(r) => (Some(r.h), r.trace, Outcome::Ok),
        Err(Error::NonConvergence { iterations, residual, trace }) => {
            eprintln!("fano-balance: no convergence after {iterations} iterations (residual {residual:e})");
            (None, *trace, Outcome::CheckFailed)
        }
        Err(e) => return Err(e),
    };
    if !args.timings {
        trace.wall_seconds = None;
    }
    if let Some(path) = &args.trace {
        write_json(path, &trace)?;
    }
    let final_h = match h {
        Some(h) => h,
        None => DiagonalHermitian::new(polytope, args.k, trace.final_h.clone())?,
    };
    emit(&args.out.out, &HermitianFile::from_metric(&final_h))?;
    Ok(outcome)
}

fn functionals(args: &FunctionalsArgs) -> Result<Outcome> {
    let tc = read_test_config(&args.config)?;
    let h = metric_or_identity(&args.h, &tc)?;
    let grid = parse_grid(&args.t_grid)?;
    let ctx = FunctionalContext::new(tc.polytope().clone(), tc.k())?;
    let w = tc.generator().weights_f64();
    let sink: Box<dyn std::io::Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|source| Error::File { path: p.clone(), source })?),
        None => Box::new(std::io::stdout()),
    };
    let mut csv = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    csv.write_record(["t", "E", "L", "D", "Ek", "Zk", "Dk", "ding_derivative", "residual"]).map_err(io)?;
    for t in grid {
        let ht = fano_balance::balanced::bergman_ray(&h, &w, t)?;
        let spec = QuadratureSpec::for_time(tc.polytope().dim(), t);
        let v = ctx.suite(&ht, &spec)?;
        let d = ding_derivative(&ht, &w, &spec)?;
        let r = m_matrix(&ht, &spec)?.residual();
        let row = [t, v.e, v.l, v.d, v.ek, v.zk, v.dk, d, r].map(|x| x.to_string());
        csv.write_record(&row).map_err(io)?;
    }
    csv.flush()?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct SlopeOutput {
    slope: fano_balance::balanced::SlopeReport,
    balancing_energy: fano_balance::balanced::ZLimitReport,
    product: bool,
}

fn slope(args: &SlopeArgs) -> Result<Outcome> {
    let tc = read_test_config(&args.config)?;
    let h = metric_or_identity(&args.h, &tc)?;
    if args.t_max < 20.0 {
        return Err(Error::Mismatch(format!("--t-max must be at least 20, got {}", args.t_max)));
    }
    let grid = time_grid(args.t_max, args.step);
    let slope = slope_at_infinity(&h, &tc, &grid)?;
    let ctx = FunctionalContext::new(tc.polytope().clone(), tc.k())?;
    let balancing_energy = z_limit(&ctx, &h, &tc, &grid)?;
    let ok = slope.q_est >= -1e-4 && (!tc.is_product() || slope.q_est.abs() <= 1e-4);
    emit(&args.out.out, &SlopeOutput { slope, balancing_energy, product: tc.is_product() })?;
    Ok(if ok { Outcome::Ok } else { Outcome::CheckFailed })
}

fn lowerbound(args: &LowerboundArgs) -> Result<Outcome> {
    let tc = read_test_config(&args.config)?;
    let h = metric_or_identity(&args.h, &tc)?;
    let lb = lower_bound_check(&fs(&h), &tc, args.p, &QuadratureSpec::new(tc.polytope().dim()))?;
    let holds = lb.holds;
    emit(&args.out.out, &lb)?;
    Ok(if holds { Outcome::Ok } else { Outcome::CheckFailed })
}

fn verify(args: &VerifyArgs) -> Result<Outcome> {
    let opts = VerifyOptions {
        profile: if args.full { Profile::Full } else { Profile::Quick },
        corrupt_weight_sign: args.corrupt_weight_sign,
    };
    let start = Instant::now();
    let mut report = verify_all(&opts);
    if args.timings {
        report.runtime_seconds = Some(start.elapsed().as_secs_f64());
    }
    for c in &report.checks {
        eprintln!("{}", c.summary_line());
    }
    let pass = report.all_pass;
    emit(&args.out.out, &report)?;
    Ok(if pass { Outcome::Ok } else { Outcome::CheckFailed })
}

#[derive(Serialize)]
struct BuiltinInfo {
    name: String,
    dim: usize,
    vertices: Vec<Vec<i64>>,
    lattice_points: u64,
    volume: String,
    degree: String,
}

fn list_builtins(args: &OutArgs) -> Result<Outcome> {
    let infos: Vec<BuiltinInfo> = LatticePolytope::builtins()
        .iter()
        .map(|p| BuiltinInfo {
            name: p.name().to_string(),
            dim: p.dim(),
            vertices: p.vertices().to_vec(),
            lattice_points: p.ehrhart_count(1),
            volume: format_rational(&p.volume()),
            degree: format_rational(&p.anticanonical_degree()),
        })
        .collect();
    if args.out.is_none() {
        let lines: Vec<String> = infos
            .iter()
            .map(|i| format!("{:6} dim {}  volume {:4}  (-K)^n {:2}  points {}", i.name, i.dim, i.volume, i.degree, i.lattice_points))
            .collect();
        print_stdout(&lines.join("\n"))?;
        return Ok(Outcome::Ok);
    }
    emit(&args.out, &infos)?;
    Ok(Outcome::Ok)
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    if n == 0 {
        return Err(format!("{THREADS_ENV} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Invariants(a) => invariants(a),
        Command::Balance(a) => balance(a),
        Command::Functionals(a) => functionals(a),
        Command::Slope(a) => slope(a),
        Command::Lowerbound(a) => lowerbound(a),
        Command::VerifyAll(a) => verify(a),
        Command::ListBuiltins(a) => list_builtins(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("fano-balance: {msg}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("fano-balance: error: {e}");
            ExitCode::from(1)
        }
    }
}
