use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::RunResult;
use crate::error::{Error, Result};

/// Shift for wall-time SGMs (seconds).
pub const TIME_SHIFT: f64 = 1.0;
/// Shift for iteration and evaluation-count SGMs.
pub const ITERATION_SHIFT: f64 = 50.0;

/// `exp(mean(ln(v + shift))) - shift`.
pub fn scaled_geometric_mean(values: &[f64], shift: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Domain("scaled geometric mean of an empty list".into()));
    }
    if !(shift > 0.0) {
        return Err(Error::Domain(format!("shift must be positive, got {shift}")));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!(
            "scaled geometric mean needs finite values >= 0, got {v}"
        )));
    }
    let mean = values.iter().map(|v| (v + shift).ln()).sum::<f64>() / values.len() as f64;
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((mean.exp() - shift).clamp(lo, hi))
}

/// One solver's row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgmRow {
    pub solver: String,
    pub solved: usize,
    pub total: usize,
    pub time_sgm: f64,
    pub iterations_sgm: f64,
    pub f_evals_sgm: f64,
    pub g_evals_sgm: f64,
    pub h_evals_sgm: f64,
}

/// Per-solver SGMs with failures set to the cap for iterations and time.
pub fn sgm_table(results: &[RunResult]) -> Result<Vec<SgmRow>> {
    let mut by_solver: BTreeMap<&str, Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        by_solver.entry(r.solver.as_str()).or_default().push(r);
    }
    let mut rows = Vec::new();
    for (solver, mut rs) in by_solver {
        rs.sort_by(|a, b| (&a.problem, a.seed).cmp(&(&b.problem, b.seed)));
        let col = |f: &dyn Fn(&RunResult) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
        rows.push(SgmRow {
            solver: solver.to_string(),
            solved: rs.iter().filter(|r| r.success).count(),
            total: rs.len(),
            time_sgm: scaled_geometric_mean(&col(&|r| r.normalized_time()), TIME_SHIFT)?,
            iterations_sgm: scaled_geometric_mean(&col(&|r| r.normalized_iterations()), ITERATION_SHIFT)?,
            f_evals_sgm: scaled_geometric_mean(&col(&|r| r.n_f as f64), ITERATION_SHIFT)?,
            g_evals_sgm: scaled_geometric_mean(&col(&|r| r.gradient_evals()), ITERATION_SHIFT)?,
            h_evals_sgm: scaled_geometric_mean(&col(&|r| r.n_h as f64), ITERATION_SHIFT)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Iterations,
    Time,
    GradientEvals,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Iterations => "iterations",
            Metric::Time => "time",
            Metric::GradientEvals => "gradient_evals",
        }
    }

    /// Metric of a run, clamped away from zero so ratios stay finite.
    pub fn value(&self, r: &RunResult) -> f64 {
        match self {
            Metric::Iterations => (r.iterations as f64).max(1.0),
            Metric::Time => r.time_secs.max(1e-6),
            Metric::GradientEvals => r.gradient_evals().max(1.0),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iterations" => Ok(Metric::Iterations),
            "time" => Ok(Metric::Time),
            "gradient_evals" | "gradient-evals" => Ok(Metric::GradientEvals),
            _ => Err(Error::Config(format!(
                "unknown metric `{s}` (expected iterations, time or gradient_evals)"
            ))),
        }
    }
}

/// Performance-profile curves on a shared grid of `alpha` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub metric: Metric,
    pub alphas: Vec<f64>,
    /// Solver -> fraction of instances solved within `2^alpha` of the best.
    pub curves: BTreeMap<String, Vec<f64>>,
    /// Solver -> `metric / best` per instance, `None` on failure.
    pub ratios: BTreeMap<String, Vec<Option<f64>>>,
    /// Instance keys `problem#seed`, in the order of `ratios`.
    pub instances: Vec<String>,
}

const RATIO_SLACK: f64 = 1e-12;
const GRID_POINTS: usize = 201;

impl ProfileTable {
    /// Fraction of instances `solver` solves within `2^alpha` of the best.
    pub fn fraction_at(&self, solver: &str, alpha: f64) -> f64 {
        let Some(rs) = self.ratios.get(solver) else {
            return 0.0;
        };
        if rs.is_empty() {
            return 0.0;
        }
        let bound = 2f64.powf(alpha) * (1.0 + RATIO_SLACK);
        rs.iter().filter(|r| r.is_some_and(|v| v <= bound)).count() as f64 / rs.len() as f64
    }
}

fn instance_key(r: &RunResult) -> String {
    format!("{}#{}", r.problem, r.seed)
}

/// Dolan-More profile over the instances (problem, seed) present in
/// `results`. Instances no solver solved stay in the denominators.
pub fn performance_profile(results: &[RunResult], metric: Metric) -> ProfileTable {
    let solvers: BTreeSet<&str> = results.iter().map(|r| r.solver.as_str()).collect();
    let instances: BTreeSet<String> = results.iter().map(instance_key).collect();
    let instances: Vec<String> = instances.into_iter().collect();
    let mut cell: BTreeMap<(&str, &str), Option<f64>> = BTreeMap::new();
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    let keys: Vec<String> = results.iter().map(instance_key).collect();
    for (r, key) in results.iter().zip(keys.iter()) {
        let v = r.success.then(|| metric.value(r));
        let e = cell.entry((r.solver.as_str(), key.as_str())).or_insert(None);
        if let Some(v) = v {
            *e = Some(e.map_or(v, |old: f64| old.min(v)));
            let b = best.entry(key.as_str()).or_insert(f64::INFINITY);
            *b = b.min(v);
        }
    }
    let mut ratios = BTreeMap::new();
    let mut max_log: f64 = 0.0;
    for s in &solvers {
        let rs: Vec<Option<f64>> = instances
            .iter()
            .map(|k| {
                let v = cell.get(&(*s, k.as_str())).copied().flatten()?;
                let b = best.get(k.as_str())?;
                Some(v / b)
            })
            .collect();
        for r in rs.iter().flatten() {
            max_log = max_log.max(r.log2());
        }
        ratios.insert(s.to_string(), rs);
    }
    let alpha_max = max_log.ceil().max(1.0);
    let alphas: Vec<f64> = (0..GRID_POINTS)
        .map(|i| alpha_max * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let mut table = ProfileTable {
        metric,
        alphas,
        curves: BTreeMap::new(),
        ratios,
        instances,
    };
    let curves = solvers
        .iter()
        .map(|s| {
            let c = table.alphas.iter().map(|&a| table.fraction_at(s, a)).collect();
            (s.to_string(), c)
        })
        .collect();
    table.curves = curves;
    table
}
