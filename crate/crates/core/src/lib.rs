//! Tikhonov regularization with an L1 data-fidelity term for discretized
//! linear inverse problems.
//!
//! The library minimizes `‖T u − g_obs‖_L1 + α ‖u‖²_L2` with ADMM or its
//! linearized variant AD-LPMM and compares against quadratic Tikhonov
//! regularization. See the guide in `book/` for a tour.
//!
//! ```
//! use l1tikhonov::experiment::benchmark_problem;
//! use l1tikhonov::solvers::{adlpmm_solve, SolverConfig};
//!
//! let p = benchmark_problem(33)?;
//! let mut cfg = SolverConfig::new(1e-3);
//! cfg.max_iter = 500;
//! let r = adlpmm_solve(&p.op, &p.g_exact, &cfg)?;
//! assert_eq!(r.u.len(), 33);
//! # Ok::<(), l1tikhonov::error::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod experiment;
pub mod linop;
pub mod noise;
pub mod numlin;
pub mod solvers;
pub mod theory;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/operator.md")]
    mod operator {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
    #[doc = include_str!("../../../book/src/experiment.md")]
    mod experiment {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
