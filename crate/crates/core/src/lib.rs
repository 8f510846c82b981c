//! Homogeneous second-order descent (HSODM) for smooth unconstrained
//! minimization.
//!
//! Every iteration lifts the gradient and Hessian into the symmetric
//! `(n+1) x (n+1)` matrix `F = [[H, g], [g^T, -delta]]`, computes its leftmost
//! eigenvector `[v; t]` (densely, or with a skewed-start Lanczos process), and
//! turns it into a descent direction. The crate also ships two classical
//! baselines (Newton trust-region with Steihaug-Toint CG, adaptive cubic
//! regularization), a suite of analytic test problems, and a benchmark
//! harness producing scaled geometric means and performance profiles.
//!
//! ```
//! use hsodm::problem::make_problem;
//! use hsodm::solver::{hsodm_solve, SolverConfig, Status};
//!
//! let problem = make_problem("rosenbrock", 2).unwrap();
//! let x0 = problem.standard_start();
//! let config = SolverConfig::new(1e-6);
//! let result = hsodm_solve(problem.as_ref(), &x0, &config).unwrap();
//! assert_eq!(result.status, Status::SospCertified);
//! assert!((result.x_final[0] - 1.0).abs() < 1e-4);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod error;
pub mod homogeneous;
pub mod lanczos;
pub mod linalg;
pub mod problem;
pub mod solver;
pub mod tridiag;

pub use error::{Error, Result};
