//! Composite convex minimization `F(x) = f(x) + tau g(x)` with strongly convex parts.
//!
//! The main solver is COMET, an accelerated proximal-gradient method whose line search adapts
//! the Lipschitz estimate in both directions and whose estimating sequence yields a computable
//! certificate `lambda_k` on the optimality gap. FISTA and AMGS are provided as baselines.
//!
//! ```
//! use std::sync::Arc;
//! use comet_core::{data, problem, solvers};
//!
//! let synth = data::gen_diagonal_quadratic(20, 2, 7).unwrap();
//! let f = Arc::new(problem::quadratic_oracle(&synth.data, 1e-3).unwrap());
//! let x0 = vec![0.0; 20];
//! let p = problem::split(f, problem::Regularizer::l1(1e-3).unwrap(), &x0).unwrap();
//! let cfg = solvers::SolverConfig {
//!     x0,
//!     l0: p.lipschitz(),
//!     gamma0: p.strong_convexity(),
//!     mu: p.strong_convexity(),
//!     tol: 1e-9,
//!     ..Default::default()
//! };
//! let run = solvers::comet_solve(&p, &cfg).unwrap();
//! assert_eq!(run.termination, solvers::Termination::ToleranceMet);
//! ```

pub mod data;
pub mod error;
pub mod estseq;
pub mod linalg;
pub mod mapping;
pub mod problem;
pub mod prox;
pub mod solvers;

pub use error::{Error, Result};
pub use problem::{split, CompositeProblem, Regularizer, SmoothOracle};
pub use prox::Penalty;
pub use solvers::{
    amgs_solve, comet_solve, fista_solve, solve, Method, SolveResult, SolverConfig, Termination,
};
