//! Comparison solvers: Newton trust-region with a Steihaug-Toint CG
//! subproblem solver, and adaptive cubic regularization with an
//! eigendecomposition-based subproblem solver.

mod cubic;
mod trust_region;

pub use cubic::{cubic_reg_solve, cubic_subproblem, CubicRegConfig, CubicRegState, CubicStep};
pub use trust_region::{newton_tr_solve, steihaug_cg, SteihaugStep, TrustRegionConfig, TrustRegionState};
