use std::io::Write;
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::homogeneous::StepCase;
use crate::problem::EvalCounters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Both second-order stationarity bounds verified at `x_final`.
    SospCertified,
    /// `||g|| <= gtol` reached (first-order test only).
    GradientConverged,
    MaxIters,
    LineSearchStall,
    NumericalError,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::SospCertified => "sosp_certified",
            Status::GradientConverged => "gradient_converged",
            Status::MaxIters => "max_iters",
            Status::LineSearchStall => "line_search_stall",
            Status::NumericalError => "numerical_error",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Second-order stationarity evidence at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub grad_norm: f64,
    /// `2 (U_H + delta) r^3 + (M / 2) r^2 + delta r`.
    pub grad_bound: f64,
    pub lambda_min: f64,
    /// `-(2 (U_H + delta) r^2 + M r + delta)`.
    pub lambda_bound: f64,
    /// Extra curvature bound at the previous iterate for inexact solves:
    /// `-2 delta - 2 ||g|| r - (U_H + gamma) r^2`.
    pub inexact_lambda_bound: Option<f64>,
    /// `grad_bound / eps`.
    pub c1: f64,
    /// `-lambda_bound / sqrt(eps)`.
    pub c2: f64,
    /// `dense` or `lanczos`.
    pub lambda_method: String,
    /// Whether `M` and `U_H` came from known constants.
    pub constants_known: bool,
    pub grad_ok: bool,
    pub curvature_ok: bool,
}

impl Certificate {
    pub fn certified(&self) -> bool {
        self.grad_ok && self.curvature_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Global,
    Local,
}

/// One accepted iteration. Field order is the trace CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub phase: Phase,
    pub f: f64,
    pub grad_norm: f64,
    pub t: f64,
    pub dual: f64,
    pub d_norm: f64,
    pub eta: f64,
    pub case: Option<StepCase>,
    pub ls_trials: usize,
    pub lanczos_iters: usize,
    pub n_f: u64,
    pub n_g: u64,
    pub n_h: u64,
    pub n_hvp: u64,
    pub residual_norm: f64,
    pub seed: u64,
    pub f_next: f64,
    pub delta: f64,
    pub radius: f64,
    pub dist_to_opt: Option<f64>,
    /// `delta_bump`, `uncertified_small_step`, `local_fallback`, ...
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub solver: String,
    pub problem: String,
    pub status: Status,
    #[serde(with = "crate::linalg::serde_dvector")]
    pub x_final: DVector<f64>,
    pub f_final: f64,
    pub grad_norm: f64,
    /// Total accepted steps, global and local.
    pub iterations: usize,
    pub local_iterations: usize,
    pub certificate: Option<Certificate>,
    pub counters: EvalCounters,
    pub wall_time_secs: f64,
    pub stagnated: bool,
    pub message: Option<String>,
    pub trace: Vec<IterationRecord>,
}

impl SolveResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        if self.trace.is_empty() {
            wtr.write_record(TRACE_COLUMNS)?;
        }
        for r in &self.trace {
            wtr.serialize(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_trace_csv(&self, path: &Path) -> Result<()> {
        crate::bench::write_atomic(path, |w| self.write_trace_csv(w))
    }
}

/// Trace CSV header.
pub const TRACE_COLUMNS: &[&str] = &[
    "k",
    "phase",
    "f",
    "grad_norm",
    "t",
    "dual",
    "d_norm",
    "eta",
    "case",
    "ls_trials",
    "lanczos_iters",
    "n_f",
    "n_g",
    "n_h",
    "n_hvp",
    "residual_norm",
    "seed",
    "f_next",
    "delta",
    "radius",
    "dist_to_opt",
    "note",
];
