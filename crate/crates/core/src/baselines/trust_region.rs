use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymmetricOperator;
use crate::problem::{Evaluator, Objective};
use crate::solver::{IterationRecord, Phase, SolveResult, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionConfig {
    pub gtol: f64,
    pub max_iters: usize,
    pub initial_radius: f64,
    pub max_radius: f64,
    /// Accept when `rho >= accept_ratio`.
    pub accept_ratio: f64,
    /// Expand when `rho >= expand_ratio` and the step hit the boundary.
    pub expand_ratio: f64,
    pub expand_factor: f64,
    pub shrink_factor: f64,
    pub max_cg_iters: Option<usize>,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            gtol: 1e-5,
            max_iters: 20_000,
            initial_radius: 1.0,
            max_radius: 1e8,
            accept_ratio: 0.1,
            expand_ratio: 0.75,
            expand_factor: 2.0,
            shrink_factor: 0.25,
            max_cg_iters: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrustRegionState {
    pub radius: f64,
    pub rho: f64,
}

impl TrustRegionState {
    /// Radius update for a step with ratio `rho` that did or did not reach
    /// the boundary.
    pub fn update(&mut self, rho: f64, boundary: bool, cfg: &TrustRegionConfig) {
        self.rho = rho;
        if !(rho >= cfg.accept_ratio) {
            self.radius *= cfg.shrink_factor;
        } else if rho >= cfg.expand_ratio && boundary {
            self.radius = (self.radius * cfg.expand_factor).min(cfg.max_radius);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteihaugStep {
    pub d: DVector<f64>,
    pub boundary: bool,
    pub negative_curvature: bool,
    pub iterations: usize,
    /// `g^T d + d^T H d / 2`.
    pub model_value: f64,
}

/// Both roots `tau_- <= tau_+` of `||z + tau p|| = radius`.
fn boundary_roots(z: &DVector<f64>, p: &DVector<f64>, radius: f64) -> (f64, f64) {
    let a = p.norm_squared();
    let b = 2.0 * z.dot(p);
    let c = z.norm_squared() - radius * radius;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    let q = -0.5 * (b + b.signum() * disc);
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    (r1.min(r2), r1.max(r2))
}

fn model(g: &DVector<f64>, h: &dyn SymmetricOperator, d: &DVector<f64>) -> Result<f64> {
    Ok(g.dot(d) + 0.5 * d.dot(&h.apply(d)?))
}

/// Truncated CG on `m(d) = g^T d + d^T H d / 2` within `||d|| <= radius`.
pub fn steihaug_cg(
    hessian: &dyn SymmetricOperator,
    g: &DVector<f64>,
    radius: f64,
    cg_tol: f64,
    max_cg: usize,
) -> Result<SteihaugStep> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("radius must be positive, got {radius}")));
    }
    let n = g.len();
    let mut z = DVector::zeros(n);
    let mut r = g.clone();
    let mut p = -g;
    let finish = |d: DVector<f64>, boundary, neg, it| -> Result<SteihaugStep> {
        let model_value = model(g, hessian, &d)?;
        Ok(SteihaugStep {
            d,
            boundary,
            negative_curvature: neg,
            iterations: it,
            model_value,
        })
    };
    if r.norm() <= cg_tol {
        return finish(z, false, false, 0);
    }
    for it in 1..=max_cg.max(1) {
        let hp = hessian.apply(&p)?;
        let kappa = p.dot(&hp);
        if kappa <= 0.0 {
            let (lo, hi) = boundary_roots(&z, &p, radius);
            let a = &z + &p * lo;
            let b = &z + &p * hi;
            let d = if model(g, hessian, &a)? <= model(g, hessian, &b)? {
                a
            } else {
                b
            };
            return finish(d, true, true, it);
        }
        let rr = r.norm_squared();
        let alpha = rr / kappa;
        let z_new = &z + &p * alpha;
        if z_new.norm() >= radius {
            let (_, hi) = boundary_roots(&z, &p, radius);
            return finish(&z + &p * hi, true, false, it);
        }
        r.axpy(alpha, &hp, 1.0);
        z = z_new;
        if r.norm() <= cg_tol {
            return finish(z, false, false, it);
        }
        let beta = r.norm_squared() / rr;
        p = -&r + p * beta;
    }
    finish(z, false, false, max_cg)
}

/// Newton trust-region method with Steihaug-Toint CG steps.
pub fn newton_tr_solve(problem: &dyn Objective, x0: &DVector<f64>, config: &TrustRegionConfig) -> Result<SolveResult> {
    let start = Instant::now();
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if !(config.initial_radius > 0.0) {
        return Err(Error::Config("initial radius must be positive".into()));
    }
    let eval = Evaluator::new(problem);
    let mut x = x0.clone();
    let mut f = eval.value(&x)?;
    let mut g = eval.gradient(&x)?;
    let mut state = TrustRegionState {
        radius: config.initial_radius,
        rho: f64::NAN,
    };
    let max_cg = config.max_cg_iters.unwrap_or(2 * n + 10);
    let optimum = problem.optimum().map(|o| o.x);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut message = None;
    let mut stagnated = false;

    let status = loop {
        let gn = g.norm();
        if gn <= config.gtol {
            break Status::GradientConverged;
        }
        if iterations >= config.max_iters {
            break Status::MaxIters;
        }
        if state.radius < 1e-15 * (1.0 + x.norm()) {
            stagnated = true;
            message = Some("trust-region radius collapsed".into());
            break Status::MaxIters;
        }
        let before = eval.counters();
        let step = (|| -> Result<_> {
            let op = eval.hessian_operator(&x);
            let cg_tol = gn * gn.sqrt().min(0.5);
            let step = steihaug_cg(&op, &g, state.radius, cg_tol, max_cg)?;
            let x_new = &x + &step.d;
            let f_new = match eval.value(&x_new) {
                Ok(v) => v,
                Err(Error::Evaluation { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok((step, x_new, f_new))
        })();
        let (step, x_new, f_new) = match step {
            Ok(s) => s,
            Err(e) => {
                message = Some(e.to_string());
                break Status::NumericalError;
            }
        };
        iterations += 1;
        let pred = -step.model_value;
        let rho = if pred > 0.0 {
            (f - f_new) / pred
        } else {
            f64::NEG_INFINITY
        };
        let accepted = rho >= config.accept_ratio && f_new < f;
        let radius_used = state.radius;
        state.update(if accepted { rho } else { f64::NEG_INFINITY }, step.boundary, config);
        let c = eval.counters().since(&before);
        trace.push(IterationRecord {
            k: iterations,
            phase: Phase::Global,
            f,
            grad_norm: gn,
            t: 0.0,
            dual: rho,
            d_norm: step.d.norm(),
            eta: if accepted { 1.0 } else { 0.0 },
            case: None,
            ls_trials: 0,
            lanczos_iters: step.iterations,
            n_f: c.n_f,
            n_g: c.n_g,
            n_h: c.n_h,
            n_hvp: c.n_hvp,
            residual_norm: 0.0,
            seed: 0,
            f_next: if accepted { f_new } else { f },
            delta: 0.0,
            radius: radius_used,
            dist_to_opt: optimum
                .as_ref()
                .map(|o| (if accepted { &x_new } else { &x } - o).norm()),
            note: if accepted { "accepted" } else { "rejected" }.to_string(),
        });
        if accepted {
            match eval.gradient(&x_new) {
                Ok(gg) => g = gg,
                Err(e) => {
                    message = Some(e.to_string());
                    break Status::NumericalError;
                }
            }
            x = x_new;
            f = f_new;
        }
    };
    Ok(SolveResult {
        solver: "newton-tr".into(),
        problem: problem.name().to_string(),
        status,
        grad_norm: g.norm(),
        f_final: f,
        x_final: x,
        iterations,
        local_iterations: 0,
        certificate: None,
        counters: eval.counters(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        stagnated,
        message,
        trace,
    })
}
