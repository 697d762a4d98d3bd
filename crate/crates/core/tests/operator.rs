use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use l1tikhonov::linop::{
    assemble_operator, exact_data, exact_data_at, green_kernel, green_operator, make_midpoint_grid, true_solution,
    true_solution_at, DiscretizedOperator, LinearOperator,
};
use l1tikhonov::numlin::{conjugate_gradient, power_iteration, WeightedSpace, DEFAULT_POWER_ITERS};

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dense_green(n: usize) -> DiscretizedOperator {
    let grid = make_midpoint_grid(n).unwrap();
    assemble_operator(&grid, |x, y| green_kernel(x, y).unwrap())
}

fn normal_apply<'a>(op: &'a impl LinearOperator) -> impl FnMut(&[f64], &mut [f64]) + 'a {
    let mut tmp = vec![0.0; op.dim()];
    move |x, out| {
        op.apply_into(x, &mut tmp);
        op.adjoint_into(&tmp, out);
    }
}

fn to_matrix(op: &DiscretizedOperator) -> DMatrix<f64> {
    let n = op.dim();
    DMatrix::from_row_slice(n, n, op.matrix())
}

/// Composite midpoint rule with `nodes` points for `∫ k(x, y) u†(y) dy`.
fn exact_data_quadrature(x: f64, nodes: usize) -> f64 {
    let h = 1.0 / nodes as f64;
    (0..nodes)
        .map(|j| {
            let y = (j as f64 + 0.5) * h;
            green_kernel(x, y).unwrap() * true_solution_at(y)
        })
        .sum::<f64>()
        * h
}

#[test]
fn exact_data_matches_fine_quadrature() {
    let nodes = 200_000;
    let grid = make_midpoint_grid(257).unwrap();
    let mut xs = vec![0.0, 0.5, 1.0, 1.0 / 3.0, 0.9];
    xs.extend(grid.points().iter().step_by(16).copied());
    for x in xs {
        let q = exact_data_quadrature(x, nodes);
        assert!(
            (exact_data_at(x) - q).abs() <= 1e-8,
            "x = {x}: {} vs {q}",
            exact_data_at(x)
        );
    }
    let g = exact_data(&grid);
    let n = g.len();
    for i in 0..n {
        assert!((g[i] - g[n - 1 - i]).abs() <= 1e-16);
    }
    assert_eq!(exact_data_at(0.0), 0.0);
    assert_eq!(exact_data_at(1.0), 0.0);
    assert!((exact_data_at(0.5) - 1.0 / 24.0).abs() < 1e-15);
}

#[test]
fn true_solution_is_symmetric() {
    let grid = make_midpoint_grid(64).unwrap();
    let u = true_solution(&grid);
    for i in 0..64 {
        assert_eq!(u[i], u[63 - i]);
    }
}

#[test]
fn fast_apply_agrees_with_dense() {
    for n in [1, 2, 3, 64, 257, 512] {
        let grid = make_midpoint_grid(n).unwrap();
        let op = green_operator(&grid);
        let u = random_vec(n, n as u64);
        let fast = op.apply(&u);
        let dense = op.apply_dense(&u);
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = fast.iter().zip(&dense).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff <= 1e-14 * scale, "n = {n}: {diff:e} vs {scale:e}");
        assert_eq!(op.matrix(), dense_green(n).matrix());
    }
}

#[test]
fn assembled_matrix_is_symmetric() {
    let op = dense_green(33);
    for i in 0..33 {
        for j in 0..33 {
            assert_eq!(op.entry(i, j), op.entry(j, i));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_consistency(n in 1usize..=512, seed in any::<u64>(), dense in any::<bool>()) {
        let op = if dense { dense_green(n) } else { green_operator(&make_midpoint_grid(n).unwrap()) };
        let sp = op.grid().space();
        let u = random_vec(n, seed);
        let w = random_vec(n, seed ^ 0x5555);
        let lhs = sp.inner(&op.apply(&u), &w);
        let rhs = sp.inner(&u, &op.apply_adjoint(&w));
        let scale = sp.l2_norm(&op.apply(&u)) * sp.l2_norm(&w) + sp.l2_norm(&u) * sp.l2_norm(&op.apply_adjoint(&w));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn apply_is_linear(n in 1usize..=300, seed in any::<u64>(), a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let op = green_operator(&make_midpoint_grid(n).unwrap());
        let u = random_vec(n, seed);
        let w = random_vec(n, seed.wrapping_add(1));
        let combo: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
        let lhs = op.apply(&combo);
        let tu = op.apply(&u);
        let tw = op.apply(&w);
        for i in 0..n {
            let rhs = a * tu[i] + b * tw[i];
            let scale = a.abs() * tu[i].abs() + b.abs() * tw[i].abs() + 1e-300;
            prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * scale.max(1e-3 * (a.abs() + b.abs())));
        }
    }

    #[test]
    fn weighted_space_axioms(n in 1usize..64, seed in any::<u64>(), c in -5.0f64..5.0) {
        let sp = WeightedSpace::new(1.0 / n as f64);
        let u = random_vec(n, seed);
        let v = random_vec(n, seed.wrapping_add(7));
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = u.iter().map(|a| c * a).collect();
        let tol = 1e-12;
        prop_assert!((sp.inner(&u, &u) - sp.l2_norm(&u).powi(2)).abs() <= tol * sp.l2_norm_sq(&u));
        prop_assert!((sp.l1_norm(&scaled) - c.abs() * sp.l1_norm(&u)).abs() <= tol * (1.0 + sp.l1_norm(&u)));
        prop_assert!((sp.l2_norm(&scaled) - c.abs() * sp.l2_norm(&u)).abs() <= tol * (1.0 + sp.l2_norm(&u)));
        prop_assert!(sp.l1_norm(&sum) <= sp.l1_norm(&u) + sp.l1_norm(&v) + tol);
        prop_assert!(sp.l2_norm(&sum) <= sp.l2_norm(&u) + sp.l2_norm(&v) + tol);
        prop_assert!(sp.inner(&u, &v).abs() <= sp.l2_norm(&u) * sp.l2_norm(&v) + tol);
    }
}

#[test]
fn midpoint_quadrature_converges_at_second_order() {
    // T sin(π·) = sin(π·)/π², and 1/3 is a cell boundary for n = 6·2^k
    let x = 1.0 / 3.0;
    let exact = (PI * x).sin() / (PI * PI);
    let errors: Vec<f64> = (0..5)
        .map(|k| {
            let grid = make_midpoint_grid(6 << k).unwrap();
            let u: Vec<f64> = grid.points().iter().map(|y| (PI * y).sin()).collect();
            (DiscretizedOperator::green_apply_at(&grid, x, &u).unwrap() - exact).abs()
        })
        .collect();
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((3.5..4.5).contains(&ratio), "{errors:?}");
    }
}

#[test]
fn largest_eigenvalue_approaches_continuum() {
    let op = green_operator(&make_midpoint_grid(257).unwrap());
    let apply = |x: &[f64], out: &mut [f64]| op.apply_into(x, out);
    let lambda = power_iteration(apply, 257, DEFAULT_POWER_ITERS, 1).unwrap();
    assert!((lambda - 1.0 / (PI * PI)).abs() < 1e-4);

    let normal = power_iteration(normal_apply(&op), 257, DEFAULT_POWER_ITERS, 1).unwrap();
    let target = (1.0 / (PI * PI)).powi(2);
    assert!(((normal - target) / target).abs() < 1e-4, "{normal} vs {target}");
}

#[test]
fn normal_operator_at_two_points() {
    let op = green_operator(&make_midpoint_grid(2).unwrap());
    let est = power_iteration(normal_apply(&op), 2, DEFAULT_POWER_ITERS, 0).unwrap();
    assert!((est - 1.0 / 64.0).abs() < 1e-12);
}

#[test]
fn power_iteration_is_monotone_and_below_dense_eigenvalue() {
    for n in [4, 16, 33, 64] {
        let op = green_operator(&make_midpoint_grid(n).unwrap());
        let a = to_matrix(&op);
        let lmax = (a.transpose() * &a).symmetric_eigen().eigenvalues.max();
        let mut last = 0.0;
        for iters in 1..=40 {
            let est = power_iteration(normal_apply(&op), n, iters, 11).unwrap();
            assert!(est >= last * (1.0 - 1e-13), "n = {n}, iters = {iters}");
            assert!(est <= lmax * (1.0 + 1e-12));
            last = est;
        }
        assert!((last - lmax).abs() < 1e-8 * lmax);
    }
}

#[test]
fn cg_error_decreases_in_energy_norm() {
    let n = 48;
    let (alpha, rho) = (1e-3, 1.0);
    let op = green_operator(&make_midpoint_grid(n).unwrap());
    let t = to_matrix(&op);
    let a = DMatrix::<f64>::identity(n, n) * (2.0 * alpha) + (t.transpose() * &t) * rho;
    let b = random_vec(n, 3);
    let exact = a.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));

    let mut tmp = vec![0.0; n];
    let mut last = f64::INFINITY;
    for k in 0..=n {
        let out = conjugate_gradient(
            |x, o| {
                op.apply_into(x, &mut tmp);
                op.adjoint_into(&tmp, o);
                for (oi, xi) in o.iter_mut().zip(x) {
                    *oi = rho * *oi + 2.0 * alpha * xi;
                }
            },
            &b,
            1e-14,
            k,
        )
        .unwrap();
        let e = DVector::from_column_slice(&out.x) - &exact;
        let energy = e.dot(&(&a * &e)).sqrt();
        assert!(energy <= last * (1.0 + 1e-10) + 1e-15, "k = {k}: {energy:e} > {last:e}");
        last = energy;
    }
    assert!(last < 1e-8 * exact.norm());
}

#[test]
fn cg_terminates_on_two_point_system() {
    let op = green_operator(&make_midpoint_grid(2).unwrap());
    let (alpha, rho) = (0.1, 2.0);
    let mut tmp = vec![0.0; 2];
    let out = conjugate_gradient(
        |x, o| {
            op.apply_into(x, &mut tmp);
            op.adjoint_into(&tmp, o);
            for (oi, xi) in o.iter_mut().zip(x) {
                *oi = rho * *oi + 2.0 * alpha * xi;
            }
        },
        &[1.0, -0.5],
        1e-10,
        2,
    )
    .unwrap();
    assert!(out.converged);
    assert!(out.iterations <= 2);
}
