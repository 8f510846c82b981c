use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{sorted_eigen, SymmetricOperator};
use crate::problem::{Evaluator, Objective};
use crate::solver::{IterationRecord, Phase, SolveResult, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicRegConfig {
    pub gtol: f64,
    pub max_iters: usize,
    pub initial_sigma: f64,
    pub min_sigma: f64,
    pub accept_ratio: f64,
    /// `sigma` is halved when `rho >= success_ratio`.
    pub success_ratio: f64,
}

impl Default for CubicRegConfig {
    fn default() -> Self {
        CubicRegConfig {
            gtol: 1e-5,
            max_iters: 20_000,
            initial_sigma: 1.0,
            min_sigma: 1e-10,
            accept_ratio: 0.1,
            success_ratio: 0.75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CubicRegState {
    pub sigma: f64,
    pub rho: f64,
}

impl CubicRegState {
    pub fn update(&mut self, rho: f64, cfg: &CubicRegConfig) {
        self.rho = rho;
        if !(rho >= cfg.accept_ratio) {
            self.sigma *= 2.0;
        } else if rho >= cfg.success_ratio {
            self.sigma = (self.sigma * 0.5).max(cfg.min_sigma);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicStep {
    pub d: DVector<f64>,
    /// Multiplier with `(H + lambda I) d = -g` and `lambda = sigma ||d||`.
    pub lambda: f64,
    pub hard_case: bool,
    /// `g^T d + d^T H d / 2 + sigma ||d||^3 / 3`.
    pub model_value: f64,
}

/// Global minimizer of `g^T d + d^T H d / 2 + (sigma / 3) ||d||^3` through the
/// secular equation `||(H + lambda I)^{-1} g|| = lambda / sigma` on the
/// eigendecomposition of `H`.
pub fn cubic_subproblem(h: &DMatrix<f64>, g: &DVector<f64>, sigma: f64) -> Result<CubicStep> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let n = g.len();
    let (vals, vecs) = sorted_eigen(h)?;
    let gt = vecs.transpose() * g;
    let gnorm = g.norm();
    let scale = vals.amax().max(1.0);
    let lo = (-vals[0]).max(0.0);
    let tiny = 1e-14 * scale;

    let step_norm = |lam: f64| -> f64 {
        (0..n)
            .map(|i| {
                let den = vals[i] + lam;
                (gt[i] / den).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    };
    let phi = |lam: f64| step_norm(lam) - lam / sigma;

    let pole_blocked = (0..n).any(|i| vals[i] + lo <= tiny && gt[i].abs() > 1e-12 * gnorm.max(f64::MIN_POSITIVE));
    let partial_at_lo: f64 = (0..n)
        .filter(|&i| vals[i] + lo > tiny)
        .map(|i| (gt[i] / (vals[i] + lo)).powi(2))
        .sum::<f64>()
        .sqrt();

    let build = |lam: f64, hard: Option<f64>| -> CubicStep {
        let mut dt = DVector::zeros(n);
        for i in 0..n {
            let den = vals[i] + lam;
            if den > tiny {
                dt[i] = -gt[i] / den;
            }
        }
        if let Some(target) = hard {
            let rem = (target * target - dt.norm_squared()).max(0.0).sqrt();
            dt[0] += rem;
        }
        let d = &vecs * dt;
        let model_value = g.dot(&d) + 0.5 * d.dot(&(h * &d)) + sigma / 3.0 * d.norm().powi(3);
        CubicStep {
            d,
            lambda: lam,
            hard_case: hard.is_some(),
            model_value,
        }
    };

    if gnorm == 0.0 && lo == 0.0 {
        return Ok(build(0.0, None));
    }
    if !pole_blocked && lo > 0.0 && partial_at_lo <= lo / sigma {
        return Ok(build(lo, Some(lo / sigma)));
    }

    let mut a = lo;
    let mut b = lo.max(1e-16) * 2.0 + (sigma * gnorm).sqrt() + 1.0;
    let mut guard = 0;
    while phi(b) > 0.0 {
        b *= 2.0;
        guard += 1;
        if guard > 2000 || !b.is_finite() {
            return Err(Error::Numerical("cubic secular equation has no bracket".into()));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if phi(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let lam = 0.5 * (a + b);
    if !lam.is_finite() {
        return Err(Error::Numerical("cubic secular root is not finite".into()));
    }
    Ok(build(lam, None))
}

/// Adaptive cubic regularization: `sigma` halves on very successful steps and
/// doubles on rejections.
pub fn cubic_reg_solve(problem: &dyn Objective, x0: &DVector<f64>, config: &CubicRegConfig) -> Result<SolveResult> {
    let start = Instant::now();
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    if !(config.initial_sigma > 0.0) {
        return Err(Error::Config("initial sigma must be positive".into()));
    }
    let eval = Evaluator::new(problem);
    let mut x = x0.clone();
    let mut f = eval.value(&x)?;
    let mut g = eval.gradient(&x)?;
    let mut state = CubicRegState {
        sigma: config.initial_sigma,
        rho: f64::NAN,
    };
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
        if state.sigma > 1e300 {
            stagnated = true;
            message = Some("cubic regularization weight diverged".into());
            break Status::MaxIters;
        }
        let before = eval.counters();
        let attempt = (|| -> Result<_> {
            let h = if problem.has_hessian() {
                eval.hessian(&x)?
            } else {
                eval.hessian_operator(&x).to_dense()?
            };
            let step = cubic_subproblem(&h, &g, state.sigma)?;
            let x_new = &x + &step.d;
            let f_new = match eval.value(&x_new) {
                Ok(v) => v,
                Err(Error::Evaluation { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok((step, x_new, f_new))
        })();
        let (step, x_new, f_new) = match attempt {
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
        let sigma_used = state.sigma;
        state.update(if accepted { rho } else { f64::NEG_INFINITY }, config);
        let c = eval.counters().since(&before);
        trace.push(IterationRecord {
            k: iterations,
            phase: Phase::Global,
            f,
            grad_norm: gn,
            t: 0.0,
            dual: step.lambda,
            d_norm: step.d.norm(),
            eta: if accepted { 1.0 } else { 0.0 },
            case: None,
            ls_trials: 0,
            lanczos_iters: 0,
            n_f: c.n_f,
            n_g: c.n_g,
            n_h: c.n_h,
            n_hvp: c.n_hvp,
            residual_norm: 0.0,
            seed: 0,
            f_next: if accepted { f_new } else { f },
            delta: sigma_used,
            radius: 0.0,
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
        solver: "cubic".into(),
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
