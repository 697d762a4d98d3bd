//! Monte Carlo convergence-rate study on the Green's-function benchmark.
//!
//! For every noise level `σ`, `runs` data sets `g_obs = g† + ξ` are simulated
//! and each method is solved on a logarithmic grid of `α`. The `α` minimizing
//! the Monte Carlo mean of `‖û_α − u†‖²` is selected per `(method, σ)` and
//! the root of that mean is recorded. A least-squares line through
//! `(log σ, log rmse)` then gives the empirical rate.
//!
//! Replicate `i` at noise level index `j` draws its noise from
//! `derive_seed(master_seed, [j, i])`, so all methods see the same data and
//! results do not depend on the number of worker threads.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::linop::{
    exact_data, green_operator, make_midpoint_grid, true_solution, DiscretizedOperator, Grid, LinearOperator,
};
use crate::noise::{derive_seed, sample_noise, NoiseModel};
use crate::solvers::{adlpmm_solve, admm_solve, l2_tikhonov_solve, SolveResult, SolverConfig};

/// Rate exponent of the benchmark for the limiting source smoothness `s = 3/2`.
pub const REFERENCE_EXPONENT: f64 = 0.375;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    L1Admm,
    L1Adlpmm,
    L2,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::L1Admm, Method::L1Adlpmm, Method::L2];

    pub fn name(&self) -> &'static str {
        match self {
            Method::L1Admm => "l1_admm",
            Method::L1Adlpmm => "l1_adlpmm",
            Method::L2 => "l2",
        }
    }

    /// Plot-data file name written by the `rates` command.
    pub fn dat_file(&self) -> &'static str {
        match self {
            Method::L1Admm => "admm.dat",
            Method::L1Adlpmm => "adlpmm.dat",
            Method::L2 => "L2.dat",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1_admm" => Ok(Method::L1Admm),
            "l1_adlpmm" => Ok(Method::L1Adlpmm),
            "l2" => Ok(Method::L2),
            other => Err(invalid(
                "method",
                format!("unknown method `{other}` (expected l1_admm, l1_adlpmm or l2)"),
            )),
        }
    }
}

/// Solves one instance with `method`. The quadratic baseline only uses
/// `cfg.alpha` and `cfg.inner_tol`.
pub fn solve_with<O>(method: Method, op: &O, g_obs: &[f64], cfg: &SolverConfig) -> Result<SolveResult>
where
    O: LinearOperator + ?Sized,
{
    match method {
        Method::L1Admm => admm_solve(op, g_obs, cfg),
        Method::L1Adlpmm => adlpmm_solve(op, g_obs, cfg),
        Method::L2 => l2_tikhonov_solve(op, g_obs, cfg.alpha, cfg.inner_tol),
    }
}

/// `count` log-equispaced values from `lo` to `hi`, endpoints included.
pub fn alpha_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi.is_finite() && lo < hi) {
        return Err(invalid("alpha_grid", format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if count < 2 {
        return Err(invalid("alpha_grid", format!("need at least 2 values, got {count}")));
    }
    let (a, b) = (lo.log10(), hi.log10());
    let last = count - 1;
    Ok((0..count)
        .map(|i| match i {
            0 => lo,
            i if i == last => hi,
            i => 10f64.powf(a + (b - a) * i as f64 / last as f64),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaGridSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl AlphaGridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        alpha_grid(self.lo, self.hi, self.count)
    }
}

/// Gaussian noise with optional impulsive outliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outliers {
    pub prob: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub methods: Vec<Method>,
    pub sigmas: Vec<f64>,
    pub alpha_grid: AlphaGridSpec,
    pub runs: usize,
    /// Template for every solve; `alpha` is overwritten from the grid.
    pub solver: SolverConfig,
    pub master_seed: u64,
    pub outliers: Option<Outliers>,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Laptop-sized study: `n = 129`, 20 runs, `K = 5000`, 25 values of `α`
    /// in `[1e-8, 1e-2]`, six noise levels in `[1e-4, 1e-2]`.
    pub fn desk_scale(master_seed: u64) -> Self {
        let mut solver = SolverConfig::new(1e-4);
        solver.max_iter = 5000;
        solver.history_every = 0;
        Self {
            n: 129,
            methods: Method::ALL.to_vec(),
            sigmas: log_space(1e-4, 1e-2, 6),
            alpha_grid: AlphaGridSpec {
                lo: 1e-8,
                hi: 1e-2,
                count: 25,
            },
            runs: 20,
            solver,
            master_seed,
            outliers: None,
            jobs: None,
        }
    }

    /// The full-size protocol: `n = 257`, 100 runs, `K = 10⁴`, 40 values of `α`.
    pub fn full_scale(master_seed: u64) -> Self {
        let mut cfg = Self::desk_scale(master_seed);
        cfg.n = 257;
        cfg.runs = 100;
        cfg.solver.max_iter = 10_000;
        cfg.alpha_grid.count = 40;
        cfg
    }

    pub fn noise_model(&self, sigma: f64) -> NoiseModel {
        match self.outliers {
            Some(o) => NoiseModel::with_outliers(sigma, o.prob, o.scale),
            None => NoiseModel::gaussian(sigma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("methods", "at least one method is required"));
        }
        if self.sigmas.is_empty() {
            return Err(invalid("sigmas", "at least one noise level is required"));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(invalid("sigmas", format!("noise levels must be positive, got {s}")));
        }
        if self.runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        if self.jobs == Some(0) {
            return Err(invalid("jobs", "must be at least 1"));
        }
        self.alpha_grid.values()?;
        self.solver.validate()?;
        for &s in &self.sigmas {
            self.noise_model(s).validate()?;
        }
        Ok(())
    }
}

/// `count` log-equispaced values in `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    alpha_grid(lo, hi, count).unwrap_or_default()
}

/// Grid, operator, truth and exact data of the benchmark.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub op: DiscretizedOperator,
    pub u_true: Vec<f64>,
    pub g_exact: Vec<f64>,
}

pub fn benchmark_problem(n: usize) -> Result<Problem> {
    let grid = make_midpoint_grid(n)?;
    Ok(Problem {
        op: green_operator(&grid),
        u_true: true_solution(&grid),
        g_exact: exact_data(&grid),
        grid,
    })
}

/// One Monte Carlo run: draws `ξ` from `noise` with `seed`, forms
/// `g_obs = g† + ξ` and returns `‖û_α − u†‖²` for every `α`. A failed solve
/// yields `None` for that `α`.
pub fn run_replicate<O>(
    op: &O,
    u_true: &[f64],
    g_exact: &[f64],
    noise: &NoiseModel,
    alphas: &[f64],
    method: Method,
    solver_cfg: &SolverConfig,
    seed: u64,
) -> Result<Vec<Option<f64>>>
where
    O: LinearOperator + ?Sized,
{
    let g_obs = observe(g_exact, noise, seed)?;
    Ok(errors_for(op, u_true, &g_obs, alphas, method, solver_cfg))
}

fn observe(g_exact: &[f64], noise: &NoiseModel, seed: u64) -> Result<Vec<f64>> {
    let xi = sample_noise(noise, g_exact.len(), seed)?;
    Ok(g_exact.iter().zip(&xi).map(|(g, x)| g + x).collect())
}

fn errors_for<O>(
    op: &O,
    u_true: &[f64],
    g_obs: &[f64],
    alphas: &[f64],
    method: Method,
    cfg: &SolverConfig,
) -> Vec<Option<f64>>
where
    O: LinearOperator + ?Sized,
{
    let space = op.grid().space();
    alphas
        .iter()
        .map(|&alpha| {
            solve_with(method, op, g_obs, &cfg.with_alpha(alpha))
                .ok()
                .map(|r| space.l2_dist_sq(&r.u, u_true))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCell {
    pub method: Method,
    pub sigma: f64,
    /// Monte Carlo mean of the squared error per grid `α`; `None` where any
    /// run failed.
    pub mean_sq_errors: Vec<Option<f64>>,
    pub alpha_opt: Option<f64>,
    pub rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodFit {
    pub method: Method,
    /// `None` when fewer than two noise levels produced a result.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub alphas: Vec<f64>,
    pub cells: Vec<RateCell>,
    pub fits: Vec<MethodFit>,
    pub reference_exponent: f64,
}

impl RateReport {
    pub fn cell(&self, method: Method, sigma: f64) -> Option<&RateCell> {
        self.cells.iter().find(|c| c.method == method && c.sigma == sigma)
    }

    pub fn fit(&self, method: Method) -> Option<&MethodFit> {
        self.fits.iter().find(|f| f.method == method)
    }

    /// `(σ, rmse)` pairs of `method` in ascending `σ`, skipping missing cells.
    pub fn curve(&self, method: Method) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .cells
            .iter()
            .filter(|c| c.method == method)
            .filter_map(|c| c.rmse.map(|r| (c.sigma, r)))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }
}

/// Least-squares line through `(ln σ, ln rmse)`; returns `(slope, intercept)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(invalid("points", "need at least two points"));
    }
    if points.iter().any(|&(s, r)| !(s > 0.0 && r > 0.0)) {
        return Err(invalid("points", "all coordinates must be positive"));
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "noise levels must not all coincide"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Runs the whole study. The report is a pure function of `cfg`.
pub fn monte_carlo_rate_study(cfg: &ExperimentConfig) -> Result<RateReport> {
    cfg.validate()?;
    let problem = benchmark_problem(cfg.n)?;
    let alphas = cfg.alpha_grid.values()?;

    let pool = match cfg.jobs {
        Some(j) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| invalid("jobs", e.to_string()))?,
        ),
        None => None,
    };

    let mut cells = Vec::new();
    for (j, &sigma) in cfg.sigmas.iter().enumerate() {
        let noise = cfg.noise_model(sigma);
        let replicate = |i: usize| -> Result<Vec<Vec<Option<f64>>>> {
            let g_obs = observe(
                &problem.g_exact,
                &noise,
                derive_seed(cfg.master_seed, &[j as u64, i as u64]),
            )?;
            Ok(cfg
                .methods
                .iter()
                .map(|&m| errors_for(&problem.op, &problem.u_true, &g_obs, &alphas, m, &cfg.solver))
                .collect())
        };
        let run_all = || (0..cfg.runs).into_par_iter().map(replicate).collect::<Result<Vec<_>>>();
        // indexed collect keeps replicate order, so sums below are sequential
        let per_run = match &pool {
            Some(p) => p.install(run_all)?,
            None => run_all()?,
        };

        for (mi, &method) in cfg.methods.iter().enumerate() {
            let mean_sq_errors: Vec<Option<f64>> = (0..alphas.len())
                .map(|ai| {
                    let mut sum = 0.0;
                    for run in &per_run {
                        sum += run[mi][ai]?;
                    }
                    Some(sum / cfg.runs as f64)
                })
                .collect();
            let best = mean_sq_errors
                .iter()
                .enumerate()
                .filter_map(|(ai, e)| e.map(|e| (ai, e)))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            cells.push(RateCell {
                method,
                sigma,
                alpha_opt: best.map(|(ai, _)| alphas[ai]),
                rmse: best.map(|(_, e)| e.sqrt()),
                mean_sq_errors,
            });
        }
    }

    let mut report = RateReport {
        alphas,
        cells,
        fits: Vec::new(),
        reference_exponent: REFERENCE_EXPONENT,
    };
    report.fits = cfg
        .methods
        .iter()
        .map(|&method| {
            let pts: Vec<(f64, f64)> = report.curve(method).into_iter().filter(|p| p.1 > 0.0).collect();
            let fit = fit_loglog_slope(&pts).ok();
            MethodFit {
                method,
                slope: fit.map(|f| f.0),
                intercept: fit.map(|f| f.1),
                points: pts.len(),
            }
        })
        .collect();
    Ok(report)
}
