//! HSODM drivers, configuration and result types.

mod config;
mod hsodm;
mod result;

pub use config::{InexactOptions, LocalPhase, Mode, ResolvedConfig, SolverConfig, Stepsize};
pub use hsodm::{
    backtracking_line_search, fixed_radius_stepsize, hsodm_solve, inexact_hsodm_solve, line_search_cap,
    local_phase_solve, small_step_certify, LineSearchOutcome,
};
pub use result::{Certificate, IterationRecord, Phase, SolveResult, Status, TRACE_COLUMNS};
