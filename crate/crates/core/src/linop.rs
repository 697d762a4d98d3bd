//! Midpoint grids on `[0, 1]`, the Green's-function integral operator and the
//! exact data of the benchmark problem.
//!
//! The operator
//!
//! ```text
//! (T u)(x) = ∫₀¹ k(x, y) u(y) dy,    k(x, y) = min{x(1 − y), y(1 − x)}
//! ```
//!
//! is the solution operator of `−g'' = u` with homogeneous Dirichlet boundary
//! values. It is discretized with the composite midpoint rule on `n` cells, so
//! the reconstruction grid and the data grid coincide.

use crate::error::{check_len, invalid, Result};
use crate::numlin::WeightedSpace;

/// Cell midpoints `x_i = (2i − 1) / (2n)` of a uniform partition of `[0, 1]`
/// together with the quadrature weight `1/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    weight: f64,
}

impl Grid {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Measure of a single sampling point, `|M| / n` with `|M| = 1`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Discrete `L1`/`L2` norms carrying this grid's weight.
    pub fn space(&self) -> WeightedSpace {
        WeightedSpace::new(self.weight)
    }
}

/// Builds the `n`-point midpoint grid.
pub fn make_midpoint_grid(n: usize) -> Result<Grid> {
    if n == 0 {
        return Err(invalid("n", "grid needs at least one point"));
    }
    let denom = 2.0 * n as f64;
    let points = (1..=n).map(|i| (2 * i - 1) as f64 / denom).collect();
    Ok(Grid {
        points,
        weight: 1.0 / n as f64,
    })
}

#[inline]
fn green(x: f64, y: f64) -> f64 {
    (x * (1.0 - y)).min(y * (1.0 - x))
}

/// Green's function of `−d²/dx²` on `[0, 1]` with Dirichlet boundary values.
pub fn green_kernel(x: f64, y: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid("x", format!("{x} is outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&y) {
        return Err(invalid("y", format!("{y} is outside [0, 1]")));
    }
    Ok(green(x, y))
}

/// A linear map on the functions sampled at a [`Grid`].
///
/// Inner products are the grid-weighted ones, so `adjoint_into` must satisfy
/// `⟨T u, w⟩ = ⟨u, T* w⟩` in [`WeightedSpace`]. Because domain and codomain
/// share a grid, the weights cancel and the adjoint is the plain transpose.
pub trait LinearOperator: Sync {
    fn grid(&self) -> &Grid;

    /// Writes `T u` into `out`. Both slices have length `grid().n()`.
    fn apply_into(&self, u: &[f64], out: &mut [f64]);

    /// Writes `T* w` into `out`.
    fn adjoint_into(&self, w: &[f64], out: &mut [f64]);

    fn dim(&self) -> usize {
        self.grid().n()
    }

    fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(u, &mut out);
        out
    }

    fn apply_adjoint(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.adjoint_into(w, &mut out);
        out
    }
}

/// `T = id` on a grid. Mostly useful for checking solvers against the
/// componentwise closed-form minimizer.
#[derive(Debug, Clone)]
pub struct IdentityOperator {
    grid: Grid,
}

impl IdentityOperator {
    pub fn new(grid: Grid) -> Self {
        Self { grid }
    }
}

impl LinearOperator for IdentityOperator {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        out.copy_from_slice(u);
    }

    fn adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        out.copy_from_slice(w);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Structure {
    Dense,
    /// Matrix entries are `weight · green(x_i, x_j)`; products cost `O(n)`.
    Green,
}

/// Midpoint-rule discretization `A_ij = weight · k(x_i, x_j)` of an integral
/// operator.
///
/// The assembled matrix is always kept. Operators built by [`green_operator`]
/// additionally apply in `O(n)` through prefix sums, which is what the
/// iterative solvers use.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    grid: Grid,
    matrix: Vec<f64>,
    structure: Structure,
}

/// Assembles the dense midpoint discretization of `kernel` on `grid`.
pub fn assemble_operator<K>(grid: &Grid, kernel: K) -> DiscretizedOperator
where
    K: Fn(f64, f64) -> f64,
{
    let n = grid.n();
    let w = grid.weight();
    let mut matrix = Vec::with_capacity(n * n);
    for &xi in grid.points() {
        for &xj in grid.points() {
            matrix.push(w * kernel(xi, xj));
        }
    }
    DiscretizedOperator {
        grid: grid.clone(),
        matrix,
        structure: Structure::Dense,
    }
}

/// The benchmark operator: [`green_kernel`] discretized on `grid`, with the
/// fast matrix-free product enabled.
pub fn green_operator(grid: &Grid) -> DiscretizedOperator {
    let mut op = assemble_operator(grid, green);
    op.structure = Structure::Green;
    op
}

impl DiscretizedOperator {
    /// Row-major `n × n` matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.grid.n() + j]
    }

    /// Dense matrix-vector product, regardless of any faster structure.
    pub fn apply_dense(&self, u: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        self.matrix
            .chunks_exact(n)
            .map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Quadrature `weight · Σ_j k(x, x_j) u_j` at an arbitrary `x ∈ [0, 1]`
    /// for the Green kernel.
    pub fn green_apply_at(grid: &Grid, x: f64, u: &[f64]) -> Result<f64> {
        check_len(grid.n(), u.len())?;
        let mut acc = 0.0;
        for (&xj, &uj) in grid.points().iter().zip(u) {
            acc += green_kernel(x, xj)? * uj;
        }
        Ok(grid.weight() * acc)
    }

    fn green_into(&self, u: &[f64], out: &mut [f64]) {
        // (Tu)_i = w [ (1 − x_i) Σ_{j≤i} x_j u_j + x_i Σ_{j>i} (1 − x_j) u_j ]
        let x = self.grid.points();
        let w = self.grid.weight();
        let mut tail: f64 = x.iter().zip(u).map(|(xj, uj)| (1.0 - xj) * uj).sum();
        let mut head = 0.0;
        for i in 0..x.len() {
            head += x[i] * u[i];
            tail -= (1.0 - x[i]) * u[i];
            out[i] = w * ((1.0 - x[i]) * head + x[i] * tail);
        }
    }
}

impl LinearOperator for DiscretizedOperator {
    fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        assert_eq!(u.len(), n);
        assert_eq!(out.len(), n);
        match self.structure {
            Structure::Green => self.green_into(u, out),
            Structure::Dense => {
                for (o, row) in out.iter_mut().zip(self.matrix.chunks_exact(n)) {
                    *o = row.iter().zip(u).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    fn adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        assert_eq!(w.len(), n);
        assert_eq!(out.len(), n);
        match self.structure {
            // symmetric kernel
            Structure::Green => self.green_into(w, out),
            Structure::Dense => {
                out.fill(0.0);
                for (wi, row) in w.iter().zip(self.matrix.chunks_exact(n)) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += a * wi;
                    }
                }
            }
        }
    }
}

/// Hat function `u†(x) = min{x, 1 − x}`.
pub fn true_solution_at(x: f64) -> f64 {
    if x <= 0.5 {
        x
    } else {
        1.0 - x
    }
}

/// Samples of the benchmark's true solution on `grid`.
pub fn true_solution(grid: &Grid) -> Vec<f64> {
    grid.points().iter().map(|&x| true_solution_at(x)).collect()
}

/// `g† = T u†` in closed form.
///
/// Solving `−g'' = u†` with `g(0) = g(1) = 0` gives the cubic
/// `g(x) = x/8 − x³/6` on `[0, 1/2]`, continued by symmetry about `1/2`.
pub fn exact_data_at(x: f64) -> f64 {
    let t = if x <= 0.5 { x } else { 1.0 - x };
    t / 8.0 - t * t * t / 6.0
}

/// Exact data sampled on `grid`, independent of the discretization of `T`.
pub fn exact_data(grid: &Grid) -> Vec<f64> {
    grid.points().iter().map(|&x| exact_data_at(x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_examples() {
        let g = make_midpoint_grid(2).unwrap();
        assert_eq!(g.points(), &[0.25, 0.75]);
        assert_eq!(g.weight(), 0.5);

        let g = make_midpoint_grid(1).unwrap();
        assert_eq!(g.points(), &[0.5]);
        assert_eq!(g.weight(), 1.0);

        let g = make_midpoint_grid(257).unwrap();
        assert_relative_eq!(g.points()[0], 1.0 / 514.0, max_relative = 1e-15);
        assert_relative_eq!(g.points()[256], 513.0 / 514.0, max_relative = 1e-15);
        assert_relative_eq!(g.weight(), 1.0 / 257.0);
        assert!(g.points().windows(2).all(|p| p[0] < p[1]));
        assert_relative_eq!(g.weight() * g.n() as f64, 1.0, max_relative = 1e-15);

        assert!(make_midpoint_grid(0).is_err());
    }

    #[test]
    fn kernel_examples() {
        for y in [0.0, 0.3, 1.0] {
            assert_eq!(green_kernel(0.0, y).unwrap(), 0.0);
            assert_eq!(green_kernel(1.0, y).unwrap(), 0.0);
        }
        assert_eq!(green_kernel(0.5, 0.5).unwrap(), 0.25);
        assert_eq!(green_kernel(0.25, 0.75).unwrap(), 1.0 / 16.0);
        assert_eq!(green_kernel(0.75, 0.25).unwrap(), 1.0 / 16.0);
        assert!(green_kernel(-0.1, 0.5).is_err());
        assert!(green_kernel(0.5, 1.5).is_err());
    }

    #[test]
    fn two_point_operator() {
        let op = green_operator(&make_midpoint_grid(2).unwrap());
        let expected = [3.0 / 32.0, 1.0 / 32.0, 1.0 / 32.0, 3.0 / 32.0];
        for (a, e) in op.matrix().iter().zip(expected) {
            assert_relative_eq!(*a, e, max_relative = 1e-15);
        }
        let y = op.apply(&[1.0, 1.0]);
        assert_relative_eq!(y[0], 0.125, max_relative = 1e-15);
        assert_relative_eq!(y[1], 0.125, max_relative = 1e-15);
    }

    #[test]
    fn true_solution_examples() {
        assert_eq!(true_solution_at(0.25), 0.25);
        assert_eq!(true_solution_at(0.75), 0.25);
        let g = make_midpoint_grid(10).unwrap();
        let u = true_solution(&g);
        for i in 0..10 {
            assert_relative_eq!(u[i], u[9 - i], max_relative = 1e-14);
        }
    }

    #[test]
    fn exact_data_boundary_and_peak() {
        assert_eq!(exact_data_at(0.0), 0.0);
        assert_eq!(exact_data_at(1.0), 0.0);
        assert_relative_eq!(exact_data_at(0.5), 1.0 / 24.0, max_relative = 1e-15);
    }

    #[test]
    fn dense_operator_adjoint_is_transpose() {
        let g = make_midpoint_grid(3).unwrap();
        let op = assemble_operator(&g, |x, y| x + 2.0 * y);
        let u = [1.0, -2.0, 0.5];
        let w = [0.3, 0.1, -1.0];
        let s = g.space();
        let lhs = s.inner(&op.apply(&u), &w);
        let rhs = s.inner(&u, &op.apply_adjoint(&w));
        assert_relative_eq!(lhs, rhs, max_relative = 1e-14);
    }
}
