//! Reconstruction methods for
//!
//! ```text
//! min_u  ‖T u − g‖_{L1} + α ‖u‖²_{L2}
//! ```
//!
//! and the quadratic baseline `‖T u − g‖²_{L2} + α ‖u‖²_{L2}`.
//!
//! Both splitting methods work on `min ‖v‖_{L1} + α‖u‖²` subject to
//! `T u − v = g`, with the augmented Lagrangian written in the scaled form
//! `(ρ/2)‖T u − v − g + μ/ρ‖²`. All norms carry the grid weight. Since the L1
//! term and the augmented term share that weight, the per-component `v`
//! problem is `|v_i| + (ρ/2)(v_i − z_i)²` and its threshold is exactly `1/ρ`.
//! The multiplier `μ` is stored as a raw vector.

use crate::error::{check_len, invalid, Error, Result};
use crate::linop::LinearOperator;
use crate::numlin::{conjugate_gradient_from, power_iteration, WeightedSpace, DEFAULT_CG_TOL, DEFAULT_POWER_ITERS};

/// Safety factor applied to the power-iteration estimate when `β` is automatic.
pub const BETA_SAFETY: f64 = 1.05;

/// Proximal constant of the linearized method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    /// `BETA_SAFETY · ρ · λ_max(T*T)` with `λ_max` from power iteration.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Regularization parameter `α`.
    pub alpha: f64,
    /// Augmented-Lagrangian penalty `ρ`.
    pub rho_pen: f64,
    pub beta: Beta,
    /// Number of outer iterations `K`.
    pub max_iter: usize,
    /// Seed of the power-iteration start vector.
    pub seed: u64,
    /// Relative residual tolerance of the inner CG solves.
    pub inner_tol: f64,
    /// Cap on inner CG iterations; `None` means `2n`.
    pub inner_max_iter: Option<usize>,
    pub power_iters: usize,
    /// Record the objective every this many iterations; `0` disables it.
    pub history_every: usize,
    /// Optional early stop when both the primal residual and the change in
    /// `u` drop below this tolerance (relative to `1 + ‖g‖`, `1 + ‖u‖`).
    pub stop_tol: Option<f64>,
}

impl SolverConfig {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            rho_pen: 1.0,
            beta: Beta::Auto,
            max_iter: 10_000,
            seed: 0,
            inner_tol: DEFAULT_CG_TOL,
            inner_max_iter: None,
            power_iters: DEFAULT_POWER_ITERS,
            history_every: 100,
            stop_tol: None,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if !(self.rho_pen > 0.0 && self.rho_pen.is_finite()) {
            return Err(invalid("rho_pen", format!("must be positive, got {}", self.rho_pen)));
        }
        if let Beta::Fixed(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(invalid("beta", format!("must be positive, got {b}")));
            }
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if !(self.inner_tol > 0.0) {
            return Err(invalid("inner_tol", "must be positive"));
        }
        if self.power_iters == 0 {
            return Err(invalid("power_iters", "must be at least 1"));
        }
        if let Some(t) = self.stop_tol {
            if !(t > 0.0) {
                return Err(invalid("stop_tol", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub u: Vec<f64>,
    /// Splitting variable; empty for the quadratic baseline.
    pub v: Vec<f64>,
    /// Multiplier; empty for the quadratic baseline.
    pub mu: Vec<f64>,
    pub objective: f64,
    /// `‖T u − v − g‖_{L2}`.
    pub primal_residual: f64,
    pub iterations_run: usize,
    /// Total inner CG iterations over the run.
    pub inner_iterations: usize,
    /// `(iteration, objective)` samples.
    pub objective_history: Vec<(usize, f64)>,
}

/// `ψ_τ(x)`: shrinks `x` towards zero by `τ`, with dead zone `[−τ, τ]`.
pub fn soft_threshold(x: f64, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(invalid("tau", format!("must be nonnegative, got {tau}")));
    }
    Ok(shrink(x, tau))
}

/// Componentwise [`soft_threshold`].
pub fn soft_threshold_vec(x: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau >= 0.0) {
        return Err(invalid("tau", format!("must be nonnegative, got {tau}")));
    }
    Ok(x.iter().map(|&xi| shrink(xi, tau)).collect())
}

#[inline]
fn shrink(x: f64, tau: f64) -> f64 {
    if x >= tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// `‖T u − g‖_{L1} + α‖u‖²_{L2}` in grid-weighted norms.
pub fn objective_l1<O>(op: &O, g_obs: &[f64], alpha: f64, u: &[f64]) -> Result<f64>
where
    O: LinearOperator + ?Sized,
{
    check_len(op.dim(), g_obs.len())?;
    check_len(op.dim(), u.len())?;
    let tu = op.apply(u);
    Ok(l1_objective_from(&op.grid().space(), &tu, g_obs, alpha, u))
}

fn l1_objective_from(s: &WeightedSpace, tu: &[f64], g: &[f64], alpha: f64, u: &[f64]) -> f64 {
    let fit: f64 = tu.iter().zip(g).map(|(a, b)| (a - b).abs()).sum();
    s.weight() * fit + alpha * s.l2_norm_sq(u)
}

/// `‖T u − g‖²_{L2} + α‖u‖²_{L2}`.
pub fn objective_l2<O>(op: &O, g_obs: &[f64], alpha: f64, u: &[f64]) -> Result<f64>
where
    O: LinearOperator + ?Sized,
{
    check_len(op.dim(), g_obs.len())?;
    check_len(op.dim(), u.len())?;
    let s = op.grid().space();
    let tu = op.apply(u);
    Ok(s.l2_dist_sq(&tu, g_obs) + alpha * s.l2_norm_sq(u))
}

/// Estimate of `λ_max(T*T)` by power iteration.
pub fn normal_operator_norm<O>(op: &O, iters: usize, seed: u64) -> Result<f64>
where
    O: LinearOperator + ?Sized,
{
    let mut tmp = vec![0.0; op.dim()];
    power_iteration(
        |x, out| {
            op.apply_into(x, &mut tmp);
            op.adjoint_into(&tmp, out);
        },
        op.dim(),
        iters,
        seed,
    )
}

/// Scratch state shared by the v- and μ-updates of both splitting methods.
struct Splitting<'a> {
    g: &'a [f64],
    rho: f64,
    v: Vec<f64>,
    mu: Vec<f64>,
}

impl Splitting<'_> {
    /// v ← ψ_{1/ρ}(μ/ρ + Tu − g); μ ← μ + ρ(Tu − v − g).
    fn update(&mut self, tu: &[f64]) {
        let rho = self.rho;
        let tau = 1.0 / rho;
        for i in 0..tu.len() {
            let r = tu[i] - self.g[i];
            let v = shrink(self.mu[i] / rho + r, tau);
            self.v[i] = v;
            self.mu[i] += rho * (r - v);
        }
    }

    fn primal_residual(&self, s: &WeightedSpace, tu: &[f64]) -> f64 {
        let sq: f64 = (0..tu.len())
            .map(|i| {
                let d = tu[i] - self.v[i] - self.g[i];
                d * d
            })
            .sum();
        (s.weight() * sq).sqrt()
    }

    fn finite(&self) -> bool {
        self.v.iter().chain(&self.mu).all(|x| x.is_finite())
    }
}

struct Tracker<'a> {
    cfg: &'a SolverConfig,
    space: WeightedSpace,
    g_norm: f64,
    history: Vec<(usize, f64)>,
}

impl<'a> Tracker<'a> {
    fn new(cfg: &'a SolverConfig, space: WeightedSpace, g: &[f64]) -> Self {
        Self {
            cfg,
            space,
            g_norm: space.l2_norm(g),
            history: Vec::new(),
        }
    }

    /// Records history and returns `true` when the optional stop rule fires.
    fn step(&mut self, k: usize, split: &Splitting, tu: &[f64], u: &[f64], u_prev: &[f64]) -> bool {
        let every = self.cfg.history_every;
        if every > 0 && (k + 1) % every == 0 {
            let obj = l1_objective_from(&self.space, tu, split.g, self.cfg.alpha, u);
            self.history.push((k + 1, obj));
        }
        match self.cfg.stop_tol {
            Some(tol) => {
                let res = split.primal_residual(&self.space, tu);
                let du = self.space.l2_dist_sq(u, u_prev).sqrt();
                res <= tol * (1.0 + self.g_norm) && du <= tol * (1.0 + self.space.l2_norm(u))
            }
            None => false,
        }
    }
}

fn check_inputs<O>(op: &O, g_obs: &[f64], cfg: &SolverConfig) -> Result<()>
where
    O: LinearOperator + ?Sized,
{
    cfg.validate()?;
    check_len(op.dim(), g_obs.len())?;
    if g_obs.iter().any(|x| !x.is_finite()) {
        return Err(invalid("g_obs", "contains non-finite values"));
    }
    Ok(())
}

fn finish<O>(
    op: &O,
    g_obs: &[f64],
    cfg: &SolverConfig,
    u: Vec<f64>,
    split: Splitting,
    iterations_run: usize,
    inner_iterations: usize,
    history: Vec<(usize, f64)>,
) -> SolveResult
where
    O: LinearOperator + ?Sized,
{
    let s = op.grid().space();
    let tu = op.apply(&u);
    let objective = l1_objective_from(&s, &tu, g_obs, cfg.alpha, &u);
    let primal_residual = split.primal_residual(&s, &tu);
    SolveResult {
        u,
        v: split.v,
        mu: split.mu,
        objective,
        primal_residual,
        iterations_run,
        inner_iterations,
        objective_history: history,
    }
}

/// ADMM with the exact u-step
/// `u ← (2αI + ρT*T)⁻¹ T*(ρ(v + g) − μ)`, solved by CG warm-started at the
/// previous iterate. Runs `cfg.max_iter` iterations from `u = v = μ = 0`.
pub fn admm_solve<O>(op: &O, g_obs: &[f64], cfg: &SolverConfig) -> Result<SolveResult>
where
    O: LinearOperator + ?Sized,
{
    check_inputs(op, g_obs, cfg)?;
    let n = op.dim();
    let (alpha, rho) = (cfg.alpha, cfg.rho_pen);
    let inner_max = cfg.inner_max_iter.unwrap_or(2 * n);

    let mut u = vec![0.0; n];
    let mut u_prev = vec![0.0; n];
    let mut tu = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut split = Splitting {
        g: g_obs,
        rho,
        v: vec![0.0; n],
        mu: vec![0.0; n],
    };
    let mut tracker = Tracker::new(cfg, op.grid().space(), g_obs);
    let mut inner_iterations = 0;
    let mut iterations_run = 0;

    for k in 0..cfg.max_iter {
        for i in 0..n {
            tmp[i] = rho * (split.v[i] + g_obs[i]) - split.mu[i];
        }
        op.adjoint_into(&tmp, &mut rhs);

        u_prev.copy_from_slice(&u);
        let mut scratch = vec![0.0; n];
        let cg = conjugate_gradient_from(
            |x, out| {
                op.apply_into(x, &mut scratch);
                op.adjoint_into(&scratch, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = rho * *o + 2.0 * alpha * xi;
                }
            },
            &rhs,
            std::mem::take(&mut u),
            cfg.inner_tol,
            inner_max,
        )
        .map_err(|e| match e {
            Error::NumericalFailure { .. } => Error::NumericalFailure {
                context: "admm u-update",
                iteration: k,
            },
            other => other,
        })?;
        inner_iterations += cg.iterations;
        u = cg.x;

        op.apply_into(&u, &mut tu);
        split.update(&tu);
        iterations_run = k + 1;
        if !split.finite() || u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "admm",
                iteration: k,
            });
        }
        if tracker.step(k, &split, &tu, &u, &u_prev) {
            break;
        }
    }
    let history = std::mem::take(&mut tracker.history);
    Ok(finish(
        op,
        g_obs,
        cfg,
        u,
        split,
        iterations_run,
        inner_iterations,
        history,
    ))
}

/// Resolves `β` for [`adlpmm_solve`], checking `β > ρ λ_max(T*T)` against the
/// power-iteration estimate.
pub fn resolve_beta<O>(op: &O, cfg: &SolverConfig) -> Result<f64>
where
    O: LinearOperator + ?Sized,
{
    let lambda = normal_operator_norm(op, cfg.power_iters, cfg.seed)?;
    let floor = cfg.rho_pen * lambda;
    match cfg.beta {
        Beta::Auto => Ok(BETA_SAFETY * floor),
        Beta::Fixed(b) if b > floor => Ok(b),
        Beta::Fixed(b) => Err(Error::InvalidConfiguration(format!(
            "beta = {b} must exceed rho_pen * lambda_max(T*T) = {floor}"
        ))),
    }
}

/// Alternating direction linearized proximal method of multipliers.
///
/// The u-step replaces the linear solve of ADMM by one gradient-like step,
/// `ũ ← (1 + 2α/β)⁻¹ (ũ − (ρ/β) T*(Tũ − v − g + μ/ρ))`; the v- and μ-steps are
/// those of [`admm_solve`].
pub fn adlpmm_solve<O>(op: &O, g_obs: &[f64], cfg: &SolverConfig) -> Result<SolveResult>
where
    O: LinearOperator + ?Sized,
{
    check_inputs(op, g_obs, cfg)?;
    let beta = resolve_beta(op, cfg)?;
    let n = op.dim();
    let rho = cfg.rho_pen;
    let shrink_factor = 1.0 / (1.0 + 2.0 * cfg.alpha / beta);
    let step = rho / beta;

    let mut u = vec![0.0; n];
    let mut u_prev = vec![0.0; n];
    let mut tu = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut split = Splitting {
        g: g_obs,
        rho,
        v: vec![0.0; n],
        mu: vec![0.0; n],
    };
    let mut tracker = Tracker::new(cfg, op.grid().space(), g_obs);
    let mut iterations_run = 0;

    for k in 0..cfg.max_iter {
        for i in 0..n {
            tmp[i] = tu[i] - split.v[i] - g_obs[i] + split.mu[i] / rho;
        }
        op.adjoint_into(&tmp, &mut grad);
        u_prev.copy_from_slice(&u);
        for i in 0..n {
            u[i] = shrink_factor * (u[i] - step * grad[i]);
        }
        op.apply_into(&u, &mut tu);
        split.update(&tu);
        iterations_run = k + 1;
        if !split.finite() || u.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "ad-lpmm",
                iteration: k,
            });
        }
        if tracker.step(k, &split, &tu, &u, &u_prev) {
            break;
        }
    }
    let history = std::mem::take(&mut tracker.history);
    Ok(finish(op, g_obs, cfg, u, split, iterations_run, 0, history))
}

/// Quadratic Tikhonov baseline: solves `(T*T + αI) u = T* g` by CG.
pub fn l2_tikhonov_solve<O>(op: &O, g_obs: &[f64], alpha: f64, inner_tol: f64) -> Result<SolveResult>
where
    O: LinearOperator + ?Sized,
{
    l2_tikhonov_solve_capped(op, g_obs, alpha, inner_tol, 2 * op.dim())
}

/// [`l2_tikhonov_solve`] with an explicit CG iteration cap.
pub fn l2_tikhonov_solve_capped<O>(
    op: &O,
    g_obs: &[f64],
    alpha: f64,
    inner_tol: f64,
    max_iter: usize,
) -> Result<SolveResult>
where
    O: LinearOperator + ?Sized,
{
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    check_len(op.dim(), g_obs.len())?;
    let n = op.dim();
    let rhs = op.apply_adjoint(g_obs);
    let mut scratch = vec![0.0; n];
    let cg = conjugate_gradient_from(
        |x, out| {
            op.apply_into(x, &mut scratch);
            op.adjoint_into(&scratch, out);
            for (o, xi) in out.iter_mut().zip(x) {
                *o += alpha * xi;
            }
        },
        &rhs,
        vec![0.0; n],
        inner_tol,
        max_iter,
    )?;
    let s = op.grid().space();
    let u = cg.x;
    let tu = op.apply(&u);
    let primal_residual = s.l2_dist_sq(&tu, g_obs).sqrt();
    let objective = primal_residual * primal_residual + alpha * s.l2_norm_sq(&u);
    Ok(SolveResult {
        u,
        v: Vec::new(),
        mu: Vec::new(),
        objective,
        primal_residual,
        iterations_run: cg.iterations,
        inner_iterations: cg.iterations,
        objective_history: Vec::new(),
    })
}
