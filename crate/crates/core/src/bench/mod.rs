//! Benchmark harness: solver x problem matrices, scaled geometric means,
//! performance profiles and CSV/JSON reports.

mod report;
mod stats;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{cubic_reg_solve, newton_tr_solve, CubicRegConfig, TrustRegionConfig};
use crate::error::{Error, Result};
use crate::problem::{make_problem, parse_problem_id};
use crate::solver::{hsodm_solve, SolveResult, SolverConfig, Status};

pub use report::{
    emit_report, read_runs_csv, write_atomic, write_profile_csv, write_report_json, write_runs_csv, Report, RUN_COLUMNS,
};
pub use stats::{
    performance_profile, scaled_geometric_mean, sgm_table, Metric, ProfileTable, SgmRow, ITERATION_SHIFT, TIME_SHIFT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SolverId {
    #[serde(rename = "hsodm")]
    Hsodm,
    #[serde(rename = "hsodm-hvp")]
    HsodmHvp,
    #[serde(rename = "newton-tr")]
    NewtonTr,
    #[serde(rename = "cubic")]
    Cubic,
}

impl SolverId {
    pub const ALL: [SolverId; 4] = [SolverId::Hsodm, SolverId::HsodmHvp, SolverId::NewtonTr, SolverId::Cubic];

    pub fn as_str(&self) -> &'static str {
        match self {
            SolverId::Hsodm => "hsodm",
            SolverId::HsodmHvp => "hsodm-hvp",
            SolverId::NewtonTr => "newton-tr",
            SolverId::Cubic => "cubic",
        }
    }
}

impl std::str::FromStr for SolverId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SolverId::ALL
            .into_iter()
            .find(|id| id.as_str() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown solver `{s}` (expected hsodm, hsodm-hvp, newton-tr or cubic)"
                ))
            })
    }
}

impl std::fmt::Display for SolverId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One benchmark matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub solvers: Vec<SolverId>,
    /// Problem ids `name[:n]`.
    pub problems: Vec<String>,
    pub epsilon: f64,
    pub max_iter: usize,
    pub gtol: f64,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

impl RunSpec {
    pub fn new(solvers: Vec<SolverId>, problems: Vec<String>) -> Self {
        RunSpec {
            solvers,
            problems,
            epsilon: 1e-6,
            max_iter: 20_000,
            gtol: 1e-5,
            seeds: vec![42],
            jobs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() || self.problems.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("solver, problem and seed lists must be nonempty".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("iteration cap must be positive".into()));
        }
        if !(self.gtol > 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::Config("gtol and epsilon must be positive".into()));
        }
        for p in &self.problems {
            let (name, n) = parse_problem_id(p)?;
            make_problem(&name, n)?;
        }
        Ok(())
    }
}

/// Outcome of one (solver, problem, seed) cell. Field order is the runs CSV
/// column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub solver: String,
    pub problem: String,
    pub n: usize,
    pub seed: u64,
    pub success: bool,
    pub status: String,
    /// Raw iteration count; aggregation replaces it with `iteration_cap` on
    /// failure.
    pub iterations: usize,
    pub iteration_cap: usize,
    pub time_secs: f64,
    pub n_f: u64,
    pub n_g: u64,
    pub n_h: u64,
    pub n_hvp: u64,
    pub f_final: f64,
    pub grad_norm: f64,
    pub message: String,
}

impl RunResult {
    /// Iterations with failures set to the cap.
    pub fn normalized_iterations(&self) -> f64 {
        if self.success {
            self.iterations as f64
        } else {
            self.iteration_cap as f64
        }
    }

    /// Seconds with failures set to the cap (read as seconds).
    pub fn normalized_time(&self) -> f64 {
        if self.success {
            self.time_secs
        } else {
            self.iteration_cap as f64
        }
    }

    /// Gradient evaluations, Hessian-vector products counted as one
    /// gradient each.
    pub fn gradient_evals(&self) -> f64 {
        (self.n_g + self.n_hvp) as f64
    }
}

/// Canonical `name:n` id.
pub fn canonical_problem_id(id: &str) -> Result<String> {
    let (name, n) = parse_problem_id(id)?;
    Ok(format!("{name}:{n}"))
}

pub fn solve_with(solver: SolverId, problem_id: &str, spec: &RunSpec, seed: u64) -> Result<SolveResult> {
    let (name, n) = parse_problem_id(problem_id)?;
    let problem = make_problem(&name, n)?;
    let x0 = problem.standard_start();
    match solver {
        SolverId::Hsodm | SolverId::HsodmHvp => {
            let mut cfg = if solver == SolverId::Hsodm {
                SolverConfig::new(spec.epsilon)
            } else {
                SolverConfig::inexact(spec.epsilon)
            };
            cfg.max_outer_iters = spec.max_iter;
            cfg.gtol = Some(spec.gtol);
            cfg.seed = seed;
            hsodm_solve(problem.as_ref(), &x0, &cfg)
        }
        SolverId::NewtonTr => {
            let cfg = TrustRegionConfig {
                gtol: spec.gtol,
                max_iters: spec.max_iter,
                ..Default::default()
            };
            newton_tr_solve(problem.as_ref(), &x0, &cfg)
        }
        SolverId::Cubic => {
            let cfg = CubicRegConfig {
                gtol: spec.gtol,
                max_iters: spec.max_iter,
                ..Default::default()
            };
            cubic_reg_solve(problem.as_ref(), &x0, &cfg)
        }
    }
}

/// Runs one cell; errors and panics become failed results.
pub fn run_cell(solver: SolverId, problem_id: &str, spec: &RunSpec, seed: u64) -> RunResult {
    let canonical = canonical_problem_id(problem_id).unwrap_or_else(|_| problem_id.to_string());
    let n = parse_problem_id(problem_id).map(|p| p.1).unwrap_or(0);
    let start = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(|| solve_with(solver, problem_id, spec, seed)));
    let elapsed = start.elapsed().as_secs_f64();
    let failed = |status: &str, message: String| RunResult {
        solver: solver.to_string(),
        problem: canonical.clone(),
        n,
        seed,
        success: false,
        status: status.to_string(),
        iterations: 0,
        iteration_cap: spec.max_iter,
        time_secs: elapsed,
        n_f: 0,
        n_g: 0,
        n_h: 0,
        n_hvp: 0,
        f_final: f64::NAN,
        grad_norm: f64::NAN,
        message,
    };
    match out {
        Ok(Ok(r)) => {
            let success = r.status != Status::NumericalError && r.grad_norm <= spec.gtol;
            RunResult {
                solver: solver.to_string(),
                problem: canonical.clone(),
                n,
                seed,
                success,
                status: r.status.to_string(),
                iterations: r.iterations,
                iteration_cap: spec.max_iter,
                time_secs: elapsed,
                n_f: r.counters.n_f,
                n_g: r.counters.n_g,
                n_h: r.counters.n_h,
                n_hvp: r.counters.n_hvp,
                f_final: r.f_final,
                grad_norm: r.grad_norm,
                message: r.message.unwrap_or_default(),
            }
        }
        Ok(Err(e)) => failed("error", e.to_string()),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "solver panicked".into());
            failed("panic", msg)
        }
    }
}

/// Runs every (solver, problem, seed) cell on a pool of `spec.jobs`
/// threads. Results come back in solver, problem, seed order.
pub fn run_benchmark(spec: &RunSpec) -> Result<Vec<RunResult>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &s in &spec.solvers {
        for p in &spec.problems {
            for &seed in &spec.seeds {
                cells.push((s, p.clone(), seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results = pool.install(|| {
        cells
            .par_iter()
            .map(|(s, p, seed)| {
                log::info!("running {s} on {p} (seed {seed})");
                let r = run_cell(*s, p, spec, *seed);
                log::info!("{s} on {p}: {} after {} iterations", r.status, r.iterations);
                r
            })
            .collect::<Vec<_>>()
    });
    Ok(results)
}
