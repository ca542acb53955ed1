//! Argument parsing and command dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mdcert_core::lure::MdNonlinearity;
use mdcert_core::sdp::{CertificationResult, FeasibilityStatus, RateMethod};
use mdcert_core::sim::{
    default_ct_step, default_initial_state, empirical_rate, envelope_ratio, lyapunov_trace, simulate_ct, simulate_dt,
    Trajectory,
};
use mdcert_core::{FunctionClassParams, ProblemData, TestFunction, TimeDomain};
use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::certfile::CertificateFile;
use crate::experiments::{self, Engine};
use crate::grid::parse_kappa_grid;
use crate::svg::{Chart, Style};
use crate::tables::{self, CertifyRow, TrajectoryRow, Verdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

/// Slack allowed when comparing empirical and certified rates.
pub const RATE_SLACK: f64 = 2e-3;
/// Relative slack of the Lyapunov envelope check.
pub const ENVELOPE_TOL: f64 = 1e-3;
/// The envelope is checked up to this many multiples of `1 / rate`.
pub const ENVELOPE_HORIZON: f64 = 5.0;
/// Trajectory CSVs are thinned to at most this many rows.
const MAX_TRAJECTORY_ROWS: usize = 10_000;

#[derive(Debug, Parser)]
#[command(name = "mdcert", version, about = "Convergence-rate certificates for mirror descent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify the decay rate of the continuous-time flow.
    CertifyCt,
    /// Certify the contraction factor of the discrete-time iteration.
    CertifyDt,
    /// Bisect the certified rate over a grid of condition numbers.
    SweepKappa,
    /// Simulate mirror descent on the extremal quadratic instance.
    Simulate,
    /// Sector-only and Popov feasibility over condition numbers 2..100.
    ReproduceFig2,
    /// Certified discrete rate against (kappa - 1) / (kappa + 1).
    ReproduceFig3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Continuous,
    Discrete,
}

impl From<DomainArg> for TimeDomain {
    fn from(d: DomainArg) -> Self {
        match d {
            DomainArg::Continuous => TimeDomain::Continuous,
            DomainArg::Discrete => TimeDomain::Discrete,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    Auto,
    Fixed(f64),
}

impl FromStr for Eta {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Eta::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(Eta::Fixed(v)),
            _ => Err(format!("expected a positive number or `auto`, got {s:?}")),
        }
    }
}

impl Eta {
    fn value(self) -> Option<f64> {
        match self {
            Eta::Auto => None,
            Eta::Fixed(v) => Some(v),
        }
    }
}

#[derive(Debug, Args)]
pub struct Options {
    /// Strong convexity modulus of the objective.
    #[arg(long, global = true)]
    pub mu_f: Option<f64>,
    /// Smoothness constant of the objective.
    #[arg(long = "lf", global = true)]
    pub l_f: Option<f64>,
    /// Strong convexity modulus of the conjugate mirror map.
    #[arg(long, global = true)]
    pub mu_phi: Option<f64>,
    /// Smoothness constant of the conjugate mirror map.
    #[arg(long, global = true)]
    pub l_phi: Option<f64>,
    /// Composite condition number; sets mu = 1 and L = sqrt(kappa) on both functions.
    #[arg(long, global = true, conflicts_with_all = ["mu_f", "l_f", "mu_phi", "l_phi"])]
    pub kappa: Option<f64>,
    /// Stepsize, or `auto` for 2 / (L_f L_phi + mu_f mu_phi).
    #[arg(long, global = true)]
    pub eta: Option<Eta>,
    /// Condition numbers: `A..B` (integers), `log:LO:HI:N` or a comma list.
    #[arg(long, global = true)]
    pub kappa_grid: Option<String>,
    /// Bisection tolerance on the rate (fig2: the probed rate).
    #[arg(long, global = true)]
    pub rho_tol: Option<f64>,
    /// Drop the Popov (continuous) or off-by-one (discrete) multiplier.
    #[arg(long, global = true)]
    pub no_popov: bool,
    /// Problem dimension.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Discrete-time simulation length.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Continuous-time simulation horizon.
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    /// Continuous-time integration step.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Seed for a randomized initial state.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Time domain for sweep-kappa and simulate.
    #[arg(long, global = true, value_enum)]
    pub domain: Option<DomainArg>,
    /// Certificate file to write (certify) or check against (simulate).
    #[arg(long, global = true)]
    pub certificate: Option<PathBuf>,
    /// Add margin columns to the fig2 table.
    #[arg(long, global = true)]
    pub margins: bool,
    /// Feasibility margin a certificate must exceed.
    #[arg(long, global = true, env = "MDCERT_MARGIN_TOL")]
    pub margin_tol: Option<f64>,
    /// Box bound on the decision variables.
    #[arg(long, global = true, env = "MDCERT_VARIABLE_BOUND")]
    pub variable_bound: Option<f64>,
    /// Interior-point stopping tolerance.
    #[arg(long, global = true, env = "MDCERT_IPM_TOL")]
    pub ipm_tol: Option<f64>,
    /// Interior-point iteration limit.
    #[arg(long, global = true, env = "MDCERT_IPM_MAX_ITER")]
    pub ipm_max_iter: Option<usize>,
    /// Bisection step limit.
    #[arg(long, global = true, env = "MDCERT_MAX_BISECTIONS")]
    pub max_bisections: Option<usize>,
}

/// Invalid input detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = exit_code_for(&e);
            if code == EXIT_USAGE {
                eprintln!("\nFor more information, try '--help'.");
            }
            code
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> i32 {
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(core) = cause.downcast_ref::<mdcert_core::Error>() {
            use mdcert_core::Error as E;
            return match core {
                E::InvalidParameter(_) | E::DimensionMismatch { .. } | E::DegenerateSlope { .. } => EXIT_USAGE,
                _ => EXIT_FAILURE,
            };
        }
    }
    EXIT_FAILURE
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let o = &cli.opts;
    let engine = engine(o)?;
    match cli.command {
        Command::CertifyCt => certify(o, &engine, TimeDomain::Continuous),
        Command::CertifyDt => certify(o, &engine, TimeDomain::Discrete),
        Command::SweepKappa => sweep(o, &engine),
        Command::Simulate => simulate(o),
        Command::ReproduceFig2 => fig2(o, &engine),
        Command::ReproduceFig3 => fig3(o, &engine),
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(usage(format!("--{name} must be positive, got {x}"))),
        _ => Ok(v),
    }
}

fn engine(o: &Options) -> Result<Engine> {
    let mut e = Engine::default();
    if let Some(v) = positive("margin-tol", o.margin_tol)? {
        e.solver.options.margin_tol = v;
    }
    if let Some(v) = positive("variable-bound", o.variable_bound)? {
        e.solver.options.variable_bound = v;
    }
    if let Some(v) = positive("ipm-tol", o.ipm_tol)? {
        e.solver.options.ipm.tolerance = v;
    }
    if let Some(n) = o.ipm_max_iter {
        e.solver.options.ipm.max_iterations = n.max(1);
    }
    if let Some(n) = o.max_bisections {
        e.certify.max_bisections = n.max(1);
    }
    Ok(e)
}

/// Problem from the flags. `--mu-phi` and `--l-phi` are the moduli of the
/// conjugate mirror map; unspecified moduli default to 1.
fn problem(o: &Options, default_eta: Eta, default_dim: usize) -> Result<ProblemData> {
    let eta = o.eta.unwrap_or(default_eta).value();
    let dim = o.dim.unwrap_or(default_dim);
    if dim == 0 {
        return Err(usage("--dim must be at least 1"));
    }
    if let Some(kappa) = o.kappa {
        return Ok(ProblemData::balanced(kappa, eta, dim)?);
    }
    let class = |mu: Option<f64>, l: Option<f64>, what: &str| {
        FunctionClassParams::new(mu.unwrap_or(1.0), l.unwrap_or(1.0))
            .map_err(|e| usage(format!("invalid moduli for {what}: {e}")))
    };
    let f = class(o.mu_f, o.l_f, "the objective")?;
    let c = class(o.mu_phi, o.l_phi, "the mirror map")?;
    Ok(match eta {
        Some(eta) => ProblemData::from_conjugate(f, c, eta, dim)?,
        None => ProblemData::with_default_stepsize(f, c, dim)?,
    })
}

fn grid(o: &Options, default: &str) -> Result<Vec<f64>> {
    parse_kappa_grid(o.kappa_grid.as_deref().unwrap_or(default)).map_err(|e| usage(format!("--kappa-grid: {e:#}")))
}

fn out_dir(o: &Options, default: Option<&str>) -> Result<Option<PathBuf>> {
    let dir = o.out.clone().or_else(|| default.map(PathBuf::from));
    if let Some(d) = &dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating output directory {}", d.display()))?;
    }
    Ok(dir)
}

fn exit_for(status: FeasibilityStatus) -> i32 {
    match status {
        FeasibilityStatus::Feasible => EXIT_OK,
        FeasibilityStatus::Infeasible => EXIT_INFEASIBLE,
        FeasibilityStatus::NumericalFailure => EXIT_FAILURE,
    }
}

fn verdict_word(status: FeasibilityStatus) -> &'static str {
    match status {
        FeasibilityStatus::Feasible => "feasible",
        FeasibilityStatus::Infeasible => "infeasible",
        FeasibilityStatus::NumericalFailure => "numerical failure",
    }
}

/// Grid value for aligned tables.
fn kappa_cell(k: f64) -> String {
    if k.fract() == 0.0 && k.abs() < 1e9 {
        format!("{k}")
    } else {
        format!("{k:.4}")
    }
}

fn write_svg(path: &Path, chart: &Chart) -> Result<()> {
    std::fs::write(path, chart.render()).with_context(|| format!("writing {}", path.display()))
}

fn certify(o: &Options, engine: &Engine, domain: TimeDomain) -> Result<i32> {
    let default_eta = match domain {
        TimeDomain::Continuous => Eta::Fixed(1.0),
        TimeDomain::Discrete => Eta::Auto,
    };
    let p = problem(o, default_eta, 1)?;
    let mut engine = *engine;
    if let Some(tol) = positive("rho-tol", o.rho_tol)? {
        engine.certify.tol = tol;
    }
    let use_popov = !o.no_popov;
    let start = Instant::now();
    let r = engine.certify(&p, domain, use_popov)?;
    let elapsed = start.elapsed();
    report_certification(&p, &r);
    println!("wall time: {:.3} s", elapsed.as_secs_f64());

    let dir = out_dir(o, None)?;
    if let Some(dir) = &dir {
        let row = CertifyRow {
            domain: domain.to_string(),
            use_popov,
            mu_f: p.f().mu(),
            l_f: p.f().l(),
            mu_phi: p.phi_conj().mu(),
            l_phi: p.phi_conj().l(),
            eta: p.eta(),
            feasible: r.status.into(),
            rate: r.rate,
        };
        let path = dir.join("certify.csv");
        tables::save(&path, |w| tables::write_certify(w, &[row]))?;
        println!("wrote {}", path.display());
    }
    let cert_path = o.certificate.clone().or_else(|| dir.as_ref().map(|d| d.join("certificate.txt")));
    if let (Some(path), Some(rate), Some(assignment)) = (cert_path, r.rate, r.certificate.clone()) {
        let file = CertificateFile { domain, use_popov, rate, margin: r.margin, problem: p.with_dim(1)?, assignment };
        file.write(&path)?;
        println!("wrote {}", path.display());
    }
    Ok(exit_for(r.status))
}

fn report_certification(p: &ProblemData, r: &CertificationResult) {
    let what = match r.domain {
        TimeDomain::Continuous => "decay exponent",
        TimeDomain::Discrete => "contraction factor",
    };
    let multiplier = match (r.domain, r.use_popov) {
        (TimeDomain::Continuous, true) => "sector + Popov",
        (TimeDomain::Discrete, true) => "sector + off-by-one",
        (_, false) => "sector only",
    };
    println!(
        "problem: mu_f={} L_f={} mu_phi={} L_phi={} eta={} kappa={}",
        p.f().mu(),
        p.f().l(),
        p.phi_conj().mu(),
        p.phi_conj().l(),
        p.eta(),
        p.condition_number()
    );
    println!("domain: {} ({multiplier})", r.domain);
    println!("verdict: {}", verdict_word(r.status));
    match r.rate {
        Some(rate) => println!("rate: {rate} ({what})"),
        None => println!("rate: none"),
    }
    if r.method == RateMethod::ClosedForm {
        println!("method: closed form (linear loop)");
    }
    if let Some(cert) = &r.certificate {
        let eig = SymmetricEigen::new(cert.p.clone()).eigenvalues;
        let eig: Vec<String> = eig.iter().map(|v| format!("{v:.6e}")).collect();
        println!("P eigenvalues: [{}]", eig.join(", "));
        let mult: Vec<String> = cert.scalars.iter().map(|(n, v)| format!("{n}={v:.6e}")).collect();
        println!("multipliers: {}", mult.join(" "));
    }
    println!("margin: {:.6e}", r.margin);
    let d = &r.diagnostics;
    println!(
        "solves: {} (ipm iterations {}, bisections {}, numerical failures {})",
        d.solves, d.ipm_iterations, d.bisections, d.numerical_failures
    );
    if d.capped {
        println!("note: rate search reached its cap");
    }
    if d.monotone == Some(false) {
        println!("warning: feasibility was not monotone in the rate");
    }
}

fn sweep(o: &Options, engine: &Engine) -> Result<i32> {
    let grid = grid(o, experiments::SWEEP_GRID)?;
    let domain: TimeDomain = o.domain.unwrap_or(DomainArg::Discrete).into();
    let mut engine = *engine;
    if let Some(tol) = positive("rho-tol", o.rho_tol)? {
        engine.certify.tol = tol;
    }
    let default_eta = match domain {
        TimeDomain::Continuous => Eta::Fixed(1.0),
        TimeDomain::Discrete => Eta::Auto,
    };
    let eta = o.eta.unwrap_or(default_eta).value();
    let start = Instant::now();
    let rows = experiments::sweep(&engine, &grid, domain, !o.no_popov, eta)?;
    println!("{:>10}  {:>18}  {:>18}  {:>12}", "kappa", "verdict", "rate", "margin");
    for r in &rows {
        let rate = r.rate.map(|v| v.to_string()).unwrap_or_else(|| "-".into());
        println!("{:>10}  {:>18}  {:>18}  {:>12.3e}", kappa_cell(r.kappa), r.feasible.as_str(), rate, r.margin);
    }
    println!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    if let Some(dir) = out_dir(o, Some("results"))? {
        let csv = dir.join("sweep.csv");
        tables::save(&csv, |w| tables::write_sweep(w, &rows))?;
        let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.rate.map(|v| (r.kappa, v))).collect();
        let mut chart =
            Chart::new(&format!("Certified {domain} rate"), "kappa", "rate").with_series("certified", pts, Style::Line);
        chart.log_x = true;
        if domain == TimeDomain::Discrete {
            let curve = rows.iter().map(|r| (r.kappa, experiments::curve_rate(r.kappa))).collect();
            chart = chart.with_series("(kappa-1)/(kappa+1)", curve, Style::Markers);
        }
        let svg = dir.join("sweep.svg");
        write_svg(&svg, &chart)?;
        println!("wrote {} and {}", csv.display(), svg.display());
    }
    Ok(if rows.iter().any(|r| r.feasible == Verdict::NumericalFailure) { EXIT_FAILURE } else { EXIT_OK })
}

fn fig2(o: &Options, engine: &Engine) -> Result<i32> {
    let grid = grid(o, experiments::FIG2_GRID)?;
    let eta = o.eta.unwrap_or(Eta::Fixed(1.0)).value().unwrap_or(1.0);
    let probe = positive("rho-tol", o.rho_tol)?.unwrap_or(experiments::FIG2_PROBE_RATE);
    let start = Instant::now();
    let rows = experiments::fig2(engine, &grid, eta, probe)?;
    let elapsed = start.elapsed();
    println!("{:>10}  {:>18}  {:>18}", "kappa", "sector", "sector + Popov");
    for r in &rows {
        println!("{:>10}  {:>18}  {:>18}", kappa_cell(r.kappa), r.feasible_sector.as_str(), r.feasible_popov.as_str());
    }
    match experiments::cliff(&rows) {
        Some(k) => println!("sector-only cliff: first infeasible kappa = {k}"),
        None => println!("sector-only cliff: not reached on this grid"),
    }
    let popov_ok = rows.iter().all(|r| r.feasible_popov == Verdict::Feasible);
    println!("sector + Popov feasible on the whole grid: {popov_ok}");
    println!("probe rate: {probe}, eta: {eta}, wall time: {:.3} s", elapsed.as_secs_f64());

    if let Some(dir) = out_dir(o, Some("results"))? {
        let csv = dir.join("fig2.csv");
        tables::save(&csv, |w| tables::write_fig2(w, &rows, o.margins))?;
        let level = |v: Verdict| match v {
            Verdict::Feasible => 1.0,
            Verdict::Infeasible => 0.0,
            Verdict::NumericalFailure => f64::NAN,
        };
        let chart = Chart::new("Feasibility of the rate LMI", "kappa", "feasible (1) / infeasible (0)")
            .with_series("sector", rows.iter().map(|r| (r.kappa, level(r.feasible_sector))).collect(), Style::Step)
            .with_series(
                "sector + Popov",
                rows.iter().map(|r| (r.kappa, 1.02 * level(r.feasible_popov))).collect(),
                Style::Step,
            );
        let svg = dir.join("fig2.svg");
        write_svg(&svg, &chart)?;
        println!("wrote {} and {}", csv.display(), svg.display());
    }
    let failed = rows
        .iter()
        .any(|r| r.feasible_sector == Verdict::NumericalFailure || r.feasible_popov == Verdict::NumericalFailure);
    Ok(if failed { EXIT_FAILURE } else { EXIT_OK })
}

fn fig3(o: &Options, engine: &Engine) -> Result<i32> {
    let grid = grid(o, experiments::FIG3_GRID)?;
    let mut engine = *engine;
    if let Some(tol) = positive("rho-tol", o.rho_tol)? {
        engine.certify.tol = tol;
    }
    let start = Instant::now();
    let rows = experiments::fig3(&engine, &grid, o.eta.unwrap_or(Eta::Auto).value())?;
    let elapsed = start.elapsed();
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
    println!("{:>10}  {:>12}  {:>12}  {:>12}", "kappa", "certified", "curve", "empirical");
    for r in &rows {
        println!(
            "{:>10}  {:>12}  {:>12.6}  {:>12}",
            kappa_cell(r.kappa),
            fmt(r.rho_certified),
            r.rho_curve,
            fmt(r.rho_empirical)
        );
    }
    let gap = rows.iter().filter_map(|r| r.rho_certified.map(|c| (c - r.rho_curve).abs())).fold(0.0, f64::max);
    println!("largest |certified - curve|: {gap:.3e}");
    println!("wall time: {:.3} s", elapsed.as_secs_f64());

    if let Some(dir) = out_dir(o, Some("results"))? {
        let csv = dir.join("fig3.csv");
        tables::save(&csv, |w| tables::write_fig3(w, &rows))?;
        let mut chart = Chart::new("Certified contraction factor", "kappa", "rate")
            .with_series("(kappa-1)/(kappa+1)", rows.iter().map(|r| (r.kappa, r.rho_curve)).collect(), Style::Line)
            .with_series(
                "certified",
                rows.iter().filter_map(|r| r.rho_certified.map(|v| (r.kappa, v))).collect(),
                Style::Markers,
            )
            .with_series(
                "empirical",
                rows.iter().filter_map(|r| r.rho_empirical.map(|v| (r.kappa, v))).collect(),
                Style::Markers,
            );
        chart.log_x = true;
        let svg = dir.join("fig3.svg");
        write_svg(&svg, &chart)?;
        println!("wrote {} and {}", csv.display(), svg.display());
    }
    Ok(if rows.iter().any(|r| r.rho_certified.is_none()) { EXIT_FAILURE } else { EXIT_OK })
}

fn simulate(o: &Options) -> Result<i32> {
    let cert = o.certificate.as_deref().map(CertificateFile::read).transpose().map_err(|e| usage(format!("{e:#}")))?;
    let dim = o.dim.unwrap_or(2);
    let (p, domain) = match &cert {
        Some(c) => {
            println!("using the problem and time domain stored in the certificate");
            if dim == 0 {
                return Err(usage("--dim must be at least 1"));
            }
            (c.problem.with_dim(dim)?, c.domain)
        }
        None => (problem(o, Eta::Auto, dim)?, o.domain.unwrap_or(DomainArg::Discrete).into()),
    };
    let f = TestFunction::extremal_quadratic(p.f(), dim)?;
    let c = TestFunction::extremal_quadratic(p.phi_conj(), dim)?;
    let z_opt = MdNonlinearity::new(&p, &f, &c)?.z_opt().clone();
    let z0 = match o.seed {
        Some(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            &z_opt + DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..=1.0))
        }
        None => default_initial_state(&z_opt),
    };
    let traj = match domain {
        TimeDomain::Discrete => {
            if o.t_end.is_some() || o.h.is_some() {
                return Err(usage("--t-end and --h apply to continuous-time simulation"));
            }
            simulate_dt(&p, &f, &c, &z0, o.steps.unwrap_or(200))?
        }
        TimeDomain::Continuous => {
            if o.steps.is_some() {
                return Err(usage("--steps applies to discrete-time simulation"));
            }
            let t_end = o.t_end.unwrap_or(20.0 / (p.eta() * p.f().mu() * p.phi_conj().mu()));
            simulate_ct(&p, &f, &c, &z0, t_end, o.h.unwrap_or_else(|| default_ct_step(&p)))?
        }
    };
    println!("domain: {domain}, dimension: {dim}, samples: {}", traj.len());
    println!("final distance: {:.6e}", traj.dist.last().copied().unwrap_or(f64::NAN));

    let mut code = EXIT_OK;
    let estimate = empirical_rate(&traj);
    match &estimate {
        Ok(r) => println!(
            "empirical rate: {} (fit residual {:.3e}, window {}..{}, {})",
            r.rho_hat,
            r.residual,
            r.window.0,
            r.window.1,
            if r.reliable { "reliable" } else { "unreliable" }
        ),
        Err(e) => println!("empirical rate: unavailable ({e})"),
    }

    let lyapunov = match &cert {
        Some(cf) if cf.domain == TimeDomain::Continuous => Some(lyapunov_trace(&traj, &cf.assignment, &c)?),
        _ => None,
    };
    if let Some(cf) = &cert {
        if let Ok(r) = &estimate {
            let (sound, relation) = match domain {
                TimeDomain::Discrete => (r.rho_hat <= cf.rate + RATE_SLACK, "<="),
                TimeDomain::Continuous => (r.rho_hat >= cf.rate - RATE_SLACK, ">="),
            };
            println!(
                "soundness: {} (empirical {} {relation} certified {} with slack {RATE_SLACK})",
                if sound { "PASS" } else { "FAIL" },
                r.rho_hat,
                cf.rate
            );
            if !sound {
                code = EXIT_INFEASIBLE;
            }
        }
        if let Some(v) = &lyapunov {
            let (ok, ratio, horizon) = envelope_check(&traj, v, cf.rate);
            println!(
                "envelope: {} (max V(t) / (V(0) exp(-2 rho t)) = {ratio:.9} for t <= {horizon:.4})",
                if ok { "PASS" } else { "FAIL" }
            );
            if !ok {
                code = EXIT_INFEASIBLE;
            }
        }
    }

    if let Some(dir) = out_dir(o, None)? {
        let stride = traj.len().div_ceil(MAX_TRAJECTORY_ROWS).max(1);
        let rows: Vec<TrajectoryRow> = (0..traj.len())
            .filter(|i| i % stride == 0 || *i + 1 == traj.len())
            .map(|i| TrajectoryRow {
                t_or_k: traj.times[i],
                dist: traj.dist[i],
                lyapunov: lyapunov.as_ref().map(|v| v[i]),
            })
            .collect();
        let csv = dir.join("trajectory.csv");
        tables::save(&csv, |w| tables::write_trajectory(w, &rows))?;
        let x_label = if domain == TimeDomain::Discrete { "k" } else { "t" };
        let mut chart = Chart::new("Distance to the optimum", x_label, "||z - z*||").with_series(
            "distance",
            rows.iter().map(|r| (r.t_or_k, r.dist)).collect(),
            Style::Line,
        );
        chart.log_y = true;
        let svg = dir.join("trajectory.svg");
        write_svg(&svg, &chart)?;
        println!("wrote {} and {}", csv.display(), svg.display());
    }
    Ok(code)
}

/// Envelope check up to `ENVELOPE_HORIZON / rate`; returns the verdict, the
/// worst ratio and the horizon used.
pub fn envelope_check(traj: &Trajectory, v: &[f64], rate: f64) -> (bool, f64, f64) {
    let t_last = traj.times.last().copied().unwrap_or(0.0);
    let horizon = if rate > 0.0 { (ENVELOPE_HORIZON / rate).min(t_last) } else { t_last };
    let n = traj.times.iter().take_while(|t| **t <= horizon).count();
    let ratio = envelope_ratio(&traj.times[..n], &v[..n], rate);
    (ratio <= 1.0 + ENVELOPE_TOL, ratio, horizon)
}
