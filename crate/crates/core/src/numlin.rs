//! Matrix-free linear algebra on grid-weighted vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Default relative residual tolerance of inner CG solves.
pub const DEFAULT_CG_TOL: f64 = 1e-10;

/// Default number of power-iteration steps.
pub const DEFAULT_POWER_ITERS: usize = 100;

/// Discrete `L1`/`L2` structure with a constant point measure `weight`:
/// `‖w‖₁ = weight · Σ|w_i|`, `‖w‖₂² = weight · Σ w_i²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSpace {
    weight: f64,
}

impl WeightedSpace {
    pub fn new(weight: f64) -> Self {
        Self { weight }
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn inner(&self, u: &[f64], w: &[f64]) -> f64 {
        self.weight * dot(u, w)
    }

    pub fn l1_norm(&self, u: &[f64]) -> f64 {
        self.weight * u.iter().map(|x| x.abs()).sum::<f64>()
    }

    pub fn l2_norm_sq(&self, u: &[f64]) -> f64 {
        self.weight * dot(u, u)
    }

    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.l2_norm_sq(u).sqrt()
    }

    /// `‖u − w‖₂²` without allocating.
    pub fn l2_dist_sq(&self, u: &[f64], w: &[f64]) -> f64 {
        self.weight * u.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }
}

#[inline]
pub(crate) fn dot(u: &[f64], w: &[f64]) -> f64 {
    u.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Result of a conjugate gradient run.
#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖A x − b‖ / ‖b‖` as tracked by the CG recurrence.
    pub relative_residual: f64,
}

/// Solves `A x = b` for symmetric positive definite `A`, starting from zero.
///
/// `apply(x, out)` writes `A x` into `out`. Since the grid weight is constant
/// it cancels in every CG coefficient, so plain Euclidean products are used;
/// the stopping test `‖A x − b‖ ≤ tol · ‖b‖` is weight-independent as well.
pub fn conjugate_gradient<F>(apply: F, b: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]),
{
    conjugate_gradient_from(apply, b, vec![0.0; b.len()], tol, max_iter)
}

/// Like [`conjugate_gradient`] but warm-started at `x0`.
pub fn conjugate_gradient_from<F>(mut apply: F, b: &[f64], x0: Vec<f64>, tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if x0.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: x0.len(),
        });
    }
    let n = b.len();
    let mut x = x0;
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }

    let mut ap = vec![0.0; n];
    apply(&x, &mut ap);
    let mut r: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    if !rr.is_finite() {
        return Err(Error::NumericalFailure {
            context: "conjugate gradient",
            iteration: 0,
        });
    }
    let target = tol * b_norm;

    let mut iterations = 0;
    while rr.sqrt() > target && iterations < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || !rr.is_finite() {
            return Err(Error::NumericalFailure {
                context: "conjugate gradient",
                iteration: iterations,
            });
        }
        if pap <= 0.0 {
            // loss of definiteness in finite precision; keep the current iterate
            break;
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
        iterations += 1;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure {
            context: "conjugate gradient",
            iteration: iterations,
        });
    }
    let relative_residual = rr.sqrt() / b_norm;
    Ok(CgOutcome {
        x,
        iterations,
        converged: relative_residual <= tol,
        relative_residual,
    })
}

fn random_unit(n: usize, seed: u64) -> Option<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = dot(&x, &x).sqrt();
    if norm == 0.0 {
        return None;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    Some(x)
}

/// Estimates the largest eigenvalue of a symmetric positive semidefinite map
/// of dimension `n` by the Rayleigh quotient of power iterates.
///
/// The start vector is a pseudo-random unit vector drawn from `seed`. For
/// PSD maps the returned estimate is a lower bound on `λ_max` and does not
/// decrease with `iters`.
pub fn power_iteration<F>(mut apply: F, n: usize, iters: usize, seed: u64) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if n == 0 {
        return Err(invalid("n", "dimension must be positive"));
    }
    if iters == 0 {
        return Err(invalid("iters", "need at least one iteration"));
    }
    let mut x = match random_unit(n, seed) {
        Some(x) => x,
        None => random_unit(n, seed.wrapping_add(1))
            .ok_or_else(|| invalid("seed", "could not draw a nonzero start vector"))?,
    };
    let mut y = vec![0.0; n];
    let mut estimate = 0.0;
    for it in 0..iters {
        apply(&x, &mut y);
        estimate = dot(&x, &y);
        let norm = dot(&y, &y).sqrt();
        if !norm.is_finite() {
            return Err(Error::NumericalFailure {
                context: "power iteration",
                iteration: it,
            });
        }
        if norm == 0.0 {
            return Ok(0.0);
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
    }
    Ok(estimate)
}
