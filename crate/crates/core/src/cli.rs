//! Command-line front end of the `l1tik` binary.
//!
//! Every command reads an optional JSON configuration with the top-level
//! sections `problem`, `solver`, `experiment` and `seed`. Missing entries take
//! the desk-scale defaults; unknown keys are rejected. Exit codes are
//! [`EXIT_OK`], [`EXIT_CONFIG`] and [`EXIT_NUMERICAL`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::experiment::{
    benchmark_problem, log_space, monte_carlo_rate_study, solve_with, AlphaGridSpec, ExperimentConfig, Method,
    Outliers, RateReport,
};
use crate::noise::{empirical_moments, moment_bounds, sample_noise, NoiseModel, DOMAIN_MEASURE};
use crate::solvers::{Beta, SolveResult, SolverConfig};
use crate::theory::{consistency_check_a_smoothing, optimal_gaussian_rate, rate_exponents, SmoothnessParams};

pub const EXIT_OK: u8 = 0;
/// Unreadable or invalid configuration, or bad command-line flags.
pub const EXIT_CONFIG: u8 = 2;
/// A solver produced non-finite values.
pub const EXIT_NUMERICAL: u8 = 3;
/// Output could not be written.
pub const EXIT_IO: u8 = 1;

pub const DEFAULT_SEED: u64 = 20240501;

/// Version string recorded in every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "l1tik", version, about = "Tikhonov regularization with L1 data fidelity")]
pub struct Cli {
    /// JSON configuration file (or a manifest written by a previous run).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file (`solve`) or directory (`rates`).
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the Monte Carlo study.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one noisy instance of the benchmark problem.
    Solve,
    /// Run the Monte Carlo convergence-rate study.
    Rates,
    /// Compare empirical noise moments with their closed-form bounds.
    Moments(MomentsArgs),
    /// Print the rate exponents for a smoothness setting.
    Exponents(ExponentsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[arg(long)]
    pub sigma: f64,
    /// Threshold `λ` separating small from impulsive noise.
    #[arg(long)]
    pub lambda: f64,
    /// Moment order of `η`.
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    /// Outlier probability; adds impulsive noise when positive.
    #[arg(long, default_value_t = 0.0)]
    pub outlier_prob: f64,
    #[arg(long, default_value_t = 1.0)]
    pub outlier_scale: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ExponentsArgs {
    /// Smoothing order of the operator.
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    /// Sobolev smoothness of the solution.
    #[arg(long, allow_negative_numbers = true)]
    pub s: f64,
    /// Spatial dimension.
    #[arg(long)]
    pub d: u32,
    #[arg(long, allow_negative_numbers = true)]
    pub k: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub p: f64,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalFailure { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    /// Number of grid points.
    pub n: usize,
    /// Noise level of `solve`.
    pub sigma: f64,
    pub outliers: Option<OutlierSection>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            n: 129,
            sigma: 1e-3,
            outliers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierSection {
    pub prob: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Method of `solve`; `rates` takes its methods from `experiment`.
    pub method: Method,
    /// `α` of `solve`; `rates` sweeps the grid instead.
    pub alpha: f64,
    pub rho: f64,
    /// Fixed AD-LPMM step parameter; `null` selects it automatically.
    pub beta: Option<f64>,
    pub max_iter: usize,
    pub inner_tol: f64,
    pub inner_max_iter: Option<usize>,
    pub power_iters: usize,
    pub stop_tol: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let base = SolverConfig::new(1e-4);
        Self {
            method: Method::L1Admm,
            alpha: base.alpha,
            rho: base.rho_pen,
            beta: None,
            max_iter: 5000,
            inner_tol: base.inner_tol,
            inner_max_iter: base.inner_max_iter,
            power_iters: base.power_iters,
            stop_tol: base.stop_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaGridSection {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub methods: Vec<Method>,
    pub sigmas: Vec<f64>,
    pub alpha_grid: AlphaGridSection,
    pub runs: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            sigmas: log_space(1e-4, 1e-2, 6),
            alpha_grid: AlphaGridSection {
                lo: 1e-8,
                hi: 1e-2,
                count: 25,
            },
            runs: 20,
        }
    }
}

/// Complete configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    pub solver: SolverSection,
    pub experiment: ExperimentSection,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            problem: ProblemSection::default(),
            solver: SolverSection::default(),
            experiment: ExperimentSection::default(),
            seed: DEFAULT_SEED,
        }
    }
}

impl Config {
    /// Parses a configuration, or the `config` entry of a run manifest.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        if value.get("version").is_some() && value.get("config").is_some() {
            let manifest: RunManifest =
                serde_json::from_value(value).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
            return Ok(manifest.config);
        }
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            alpha: s.alpha,
            rho_pen: s.rho,
            beta: s.beta.map_or(Beta::Auto, Beta::Fixed),
            max_iter: s.max_iter,
            seed: self.seed,
            inner_tol: s.inner_tol,
            inner_max_iter: s.inner_max_iter,
            power_iters: s.power_iters,
            history_every: 0,
            stop_tol: s.stop_tol,
        }
    }

    pub fn noise_model(&self, sigma: f64) -> NoiseModel {
        match self.problem.outliers {
            Some(o) => NoiseModel::with_outliers(sigma, o.prob, o.scale),
            None => NoiseModel::gaussian(sigma),
        }
    }

    pub fn experiment_config(&self, jobs: Option<usize>) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            n: self.problem.n,
            methods: e.methods.clone(),
            sigmas: e.sigmas.clone(),
            alpha_grid: AlphaGridSpec {
                lo: e.alpha_grid.lo,
                hi: e.alpha_grid.hi,
                count: e.alpha_grid.count,
            },
            runs: e.runs,
            solver: self.solver_config(),
            master_seed: self.seed,
            outliers: self.problem.outliers.map(|o| Outliers {
                prob: o.prob,
                scale: o.scale,
            }),
            jobs,
        }
    }
}

/// Written next to every output; loading it with `--config` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub jobs: Option<usize>,
    pub duration_seconds: f64,
    pub config: Config,
}

fn write_manifest(
    path: &Path,
    command: &str,
    config: &Config,
    jobs: Option<usize>,
    start: Instant,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        version: VERSION.to_string(),
        command: command.to_string(),
        master_seed: config.seed,
        jobs,
        duration_seconds: start.elapsed().as_secs_f64(),
        config: config.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Formats like C's `%.{precision}e`: `1.000000e-04`.
pub fn format_exp(x: f64, precision: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.precision$e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format_exp(v, 6)).unwrap_or_default()
}

/// CSV of a single solve: `#` diagnostics lines followed by `x,u` rows.
pub fn solve_csv(config: &Config, x: &[f64], result: &SolveResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# method={}", config.solver.method);
    let _ = writeln!(out, "# n={}", x.len());
    let _ = writeln!(out, "# sigma={}", format_exp(config.problem.sigma, 6));
    let _ = writeln!(out, "# alpha={}", format_exp(config.solver.alpha, 6));
    let _ = writeln!(out, "# seed={}", config.seed);
    let _ = writeln!(out, "# objective={}", format_exp(result.objective, 16));
    let _ = writeln!(out, "# primal_residual={}", format_exp(result.primal_residual, 16));
    let _ = writeln!(out, "# iterations={}", result.iterations_run);
    out.push_str("x,u\n");
    for (xi, ui) in x.iter().zip(&result.u) {
        let _ = writeln!(out, "{},{}", format_exp(*xi, 16), format_exp(*ui, 16));
    }
    out
}

/// Two-column plot data `σ rmse` of one method in ascending `σ`.
pub fn dat_file(report: &RateReport, method: Method) -> String {
    report
        .curve(method)
        .iter()
        .map(|(s, r)| format!("{} {}\n", format_exp(*s, 6), format_exp(*r, 6)))
        .collect()
}

/// `method,sigma,alpha_opt,rmse,slope` rows; missing values stay empty.
pub fn summary_csv(report: &RateReport, methods: &[Method]) -> String {
    let mut out = String::from("method,sigma,alpha_opt,rmse,slope\n");
    for &m in methods {
        let slope = report.fit(m).and_then(|f| f.slope);
        let mut cells: Vec<_> = report.cells.iter().filter(|c| c.method == m).collect();
        cells.sort_by(|a, b| a.sigma.total_cmp(&b.sigma));
        for c in cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                m,
                format_exp(c.sigma, 6),
                fmt_opt(c.alpha_opt),
                fmt_opt(c.rmse),
                fmt_opt(slope)
            );
        }
    }
    out
}

/// Shared global options.
#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub config: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl GlobalOptions {
    fn resolve(&self) -> Result<Config, CliError> {
        let mut config = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        Ok(config)
    }
}

fn validate_problem(p: &ProblemSection) -> Result<(), CliError> {
    if p.n == 0 {
        return Err(CliError::Config("problem.n must be at least 1".into()));
    }
    if !(p.sigma >= 0.0 && p.sigma.is_finite()) {
        return Err(CliError::Config(format!(
            "problem.sigma must be nonnegative, got {}",
            p.sigma
        )));
    }
    Ok(())
}

/// Solves one instance and writes the CSV to `--output` (or stdout).
pub fn cmd_solve(opts: &GlobalOptions) -> Result<(), CliError> {
    let start = Instant::now();
    let config = opts.resolve()?;
    validate_problem(&config.problem)?;
    let cfg = config.solver_config();
    cfg.validate()?;
    let model = config.noise_model(config.problem.sigma);
    model.validate()?;

    let problem = benchmark_problem(config.problem.n)?;
    let xi = sample_noise(&model, config.problem.n, config.seed)?;
    let g_obs: Vec<f64> = problem.g_exact.iter().zip(&xi).map(|(g, e)| g + e).collect();
    let result = solve_with(config.solver.method, &problem.op, &g_obs, &cfg)?;
    let csv = solve_csv(&config, problem.grid.points(), &result);

    match &opts.output {
        Some(path) => {
            fs::write(path, &csv).map_err(|e| io_err(path, e))?;
            let mut manifest = path.clone().into_os_string();
            manifest.push(".manifest.json");
            write_manifest(Path::new(&manifest), "solve", &config, opts.jobs, start)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

/// Runs the rate study and writes `.dat` files, `summary.csv` and `manifest.json`.
pub fn cmd_rates(opts: &GlobalOptions) -> Result<RateReport, CliError> {
    let start = Instant::now();
    let config = opts.resolve()?;
    let dir = opts
        .output
        .clone()
        .ok_or_else(|| CliError::Config("rates needs --output DIR".into()))?;
    let cfg = config.experiment_config(opts.jobs);
    cfg.validate()?;

    let report = monte_carlo_rate_study(&cfg)?;

    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    for &m in &cfg.methods {
        let path = dir.join(m.dat_file());
        fs::write(&path, dat_file(&report, m)).map_err(|e| io_err(&path, e))?;
    }
    let summary = dir.join("summary.csv");
    fs::write(&summary, summary_csv(&report, &cfg.methods)).map_err(|e| io_err(&summary, e))?;
    write_manifest(&dir.join("manifest.json"), "rates", &config, opts.jobs, start)?;

    for fit in &report.fits {
        match fit.slope {
            Some(s) => println!(
                "{:<10} slope {s:.4} (reference {})",
                fit.method.name(),
                report.reference_exponent
            ),
            None => println!(
                "{:<10} slope undefined ({} usable noise levels)",
                fit.method.name(),
                fit.points
            ),
        }
    }
    let missing: Vec<_> = report.cells.iter().filter(|c| c.rmse.is_none()).collect();
    if !missing.is_empty() {
        let list: Vec<String> = missing
            .iter()
            .map(|c| format!("{} at sigma {}", c.method, c.sigma))
            .collect();
        return Err(CliError::Numerical(format!(
            "every solve failed for {}",
            list.join(", ")
        )));
    }
    Ok(report)
}

/// One row of the moment table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    pub empirical: f64,
    pub standard_error: f64,
    pub bound: f64,
}

impl MomentCheck {
    /// The bound holds up to three Monte Carlo standard errors.
    pub fn passes(&self) -> bool {
        self.empirical <= self.bound + 3.0 * self.standard_error
    }
}

/// Empirical `E[ε]` and `E[η^r]` against their bounds.
pub fn moments_table(args: &MomentsArgs, seed: u64) -> Result<(MomentCheck, MomentCheck), CliError> {
    if !(args.sigma > 0.0 && args.sigma.is_finite()) {
        return Err(CliError::Config(format!(
            "--sigma must be positive, got {}",
            args.sigma
        )));
    }
    if args.n == 0 || args.trials == 0 {
        return Err(CliError::Config("--n and --trials must be positive".into()));
    }
    let model = if args.outlier_prob > 0.0 {
        NoiseModel::with_outliers(args.sigma, args.outlier_prob, args.outlier_scale)
    } else {
        NoiseModel::gaussian(args.sigma)
    };
    model.validate()?;
    let bounds = moment_bounds(&model, args.lambda, args.r, DOMAIN_MEASURE)?;
    let est = empirical_moments(&model, args.lambda, args.r, args.n, args.trials, seed)?;
    Ok((
        MomentCheck {
            empirical: est.mean_eps,
            standard_error: est.se_eps,
            bound: bounds.eps_bound,
        },
        MomentCheck {
            empirical: est.mean_eta_r,
            standard_error: est.se_eta_r,
            bound: bounds.eta_bound,
        },
    ))
}

pub fn cmd_moments(opts: &GlobalOptions, args: &MomentsArgs) -> Result<(), CliError> {
    let seed = opts.resolve()?.seed;
    let (eps, eta) = moments_table(args, seed)?;
    println!(
        "sigma={} lambda={} r={} n={} trials={} seed={seed}",
        args.sigma, args.lambda, args.r, args.n, args.trials
    );
    println!(
        "{:<10} {:>14} {:>14} {:>14} {:>6}",
        "quantity", "empirical", "std_error", "bound", "check"
    );
    for (name, c) in [("E[eps]", eps), ("E[eta^r]", eta)] {
        println!(
            "{:<10} {:>14} {:>14} {:>14} {:>6}",
            name,
            format_exp(c.empirical, 6),
            format_exp(c.standard_error, 6),
            format_exp(c.bound, 6),
            if c.passes() { "pass" } else { "FAIL" }
        );
    }
    Ok(())
}

/// Everything printed by the `exponents` command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentsReport {
    pub vartheta: f64,
    pub theta: f64,
    pub squared_rate: f64,
    pub norm_rate: f64,
    pub optimal_rate: f64,
    /// `None` when `a ≤ d/2`, where the comparison is not defined.
    pub consistent: Option<bool>,
}

pub fn exponents_report(args: &ExponentsArgs) -> Result<ExponentsReport, CliError> {
    let params = SmoothnessParams::new(args.a, args.s, args.d, args.k, args.p);
    let rates = rate_exponents(&params)?;
    let consistent = if args.a > f64::from(args.d) / 2.0 {
        Some(consistency_check_a_smoothing(args.a, args.s, args.d)?)
    } else {
        None
    };
    Ok(ExponentsReport {
        vartheta: rates.vartheta,
        theta: rates.theta,
        squared_rate: rates.squared_rate,
        norm_rate: rates.norm_rate,
        optimal_rate: optimal_gaussian_rate(args.a, args.s, args.d)?,
        consistent,
    })
}

pub fn cmd_exponents(args: &ExponentsArgs) -> Result<(), CliError> {
    let r = exponents_report(args)?;
    println!("vartheta      {:.6}", r.vartheta);
    println!("theta         {:.6}", r.theta);
    println!("squared_rate  {:.6}", r.squared_rate);
    println!("norm_rate     {:.6}", r.norm_rate);
    println!("optimal_rate  {:.6}", r.optimal_rate);
    match r.consistent {
        Some(c) => println!("consistent    {c}"),
        None => println!("consistent    undefined (a <= d/2)"),
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let opts = GlobalOptions {
        config: cli.config,
        output: cli.output,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    let outcome = match &cli.command {
        Command::Solve => cmd_solve(&opts),
        Command::Rates => cmd_rates(&opts).map(|_| ()),
        Command::Moments(a) => cmd_moments(&opts, a),
        Command::Exponents(a) => cmd_exponents(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
