//! Exact and inexact HSODM drivers.

use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{LocalPhase, ResolvedConfig, SolverConfig, Stepsize};
use super::result::{Certificate, IterationRecord, Phase, SolveResult, Status};
use crate::error::{Error, Result};
use crate::homogeneous::{
    direction_from_solution, homogenize, solve_exact_with_threshold, HessianOp, StepCase, SubproblemSolution,
};
use crate::lanczos::{estimate_operator_norm, leftmost_eigenvalue, solve_inexact, InexactParams};
use crate::linalg::sorted_eigen;
use crate::problem::{EvalCounters, Evaluator, Objective};

/// `t` below this magnitude counts as zero in the local phase.
const LOCAL_T_TOL: f64 = 1e-14;

/// `radius / ||d||`.
pub fn fixed_radius_stepsize(d: &DVector<f64>, radius: f64) -> Result<f64> {
    let nd = d.norm();
    if nd == 0.0 || !nd.is_finite() {
        return Err(Error::Domain("fixed-radius step along a zero direction".into()));
    }
    Ok(radius / nd)
}

/// `ceil(log_beta(3 delta nu / (M + gamma)))`, at least 0.
pub fn line_search_cap(delta: f64, nu: f64, lipschitz: f64, beta: f64, gamma: f64) -> usize {
    let arg = 3.0 * delta * nu / (lipschitz + gamma);
    if !(arg > 0.0) || !arg.is_finite() {
        return 0;
    }
    let j = (arg.ln() / beta.ln()).ceil();
    if j <= 0.0 {
        0
    } else {
        j as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub eta: f64,
    /// Index `j` of the accepted trial `eta = beta^j` (or of the last trial
    /// when nothing was accepted).
    pub trials: usize,
    pub decrease: f64,
    pub f_new: f64,
    pub accepted: bool,
}

/// Backtracking from `eta = 1`: accepts the first `eta = beta^j`, `j <= j_cap`,
/// with `f(x) - f(x + eta d) >= gamma eta^3 ||d||^3 / 6`.
pub fn backtracking_line_search(
    problem: &dyn Objective,
    x: &DVector<f64>,
    d: &DVector<f64>,
    beta: f64,
    gamma: f64,
    j_cap: usize,
) -> Result<LineSearchOutcome> {
    let eval = Evaluator::new(problem);
    let fx = eval.value(x)?;
    backtrack(&eval, x, fx, d, 1.0, beta, gamma, j_cap)
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    eval: &Evaluator,
    x: &DVector<f64>,
    fx: f64,
    d: &DVector<f64>,
    eta0: f64,
    beta: f64,
    gamma: f64,
    j_cap: usize,
) -> Result<LineSearchOutcome> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Config(format!("beta must lie in (0, 1), got {beta}")));
    }
    let nd = d.norm();
    if nd == 0.0 {
        return Err(Error::Domain("line search along a zero direction".into()));
    }
    let mut eta = eta0;
    let mut last = LineSearchOutcome {
        eta,
        trials: 0,
        decrease: f64::NEG_INFINITY,
        f_new: fx,
        accepted: false,
    };
    for j in 0..=j_cap {
        let xn = x + d * eta;
        let fnew = match eval.value(&xn) {
            Ok(v) => v,
            Err(Error::Evaluation { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let dec = fx - fnew;
        last = LineSearchOutcome {
            eta,
            trials: j,
            decrease: dec,
            f_new: fnew,
            accepted: false,
        };
        if dec >= gamma * (eta * nd).powi(3) / 6.0 {
            last.accepted = true;
            return Ok(last);
        }
        eta *= beta;
    }
    Ok(last)
}

/// Second-order certificate at `x_next` after a small-value step computed
/// with corner entry `delta`. `prev` carries the subproblem solution and
/// `||g_k||` of the step for the inexact curvature bound.
pub fn small_step_certify(
    problem: &dyn Objective,
    x_next: &DVector<f64>,
    config: &SolverConfig,
    delta: f64,
    prev: Option<(&SubproblemSolution, f64)>,
) -> Result<Certificate> {
    let rc = config.resolve(&problem.constants())?;
    let eval = Evaluator::new(problem);
    let g = eval.gradient(x_next)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    certify_at(&eval, &rc, config.is_inexact(), x_next, g.norm(), delta, prev, &mut rng)
}

#[allow(clippy::too_many_arguments)]
fn certify_at(
    eval: &Evaluator,
    rc: &ResolvedConfig,
    inexact: bool,
    x: &DVector<f64>,
    grad_norm: f64,
    delta: f64,
    prev: Option<(&SubproblemSolution, f64)>,
    rng: &mut ChaCha8Rng,
) -> Result<Certificate> {
    let (lambda_min, h_norm, method) = if inexact || !eval.problem().has_hessian() {
        let op = eval.hessian_operator(x);
        let lam = leftmost_eigenvalue(&op, 1e-10, rng)?;
        let est = if rc.hessian_bound.is_none() {
            estimate_operator_norm(&op, 30, rng)? / 2.0
        } else {
            0.0
        };
        (lam, est.max(lam.abs()), "lanczos")
    } else {
        let h = eval.hessian(x)?;
        let (vals, _) = sorted_eigen(&h)?;
        let lam = vals[0];
        (lam, lam.abs().max(vals[vals.len() - 1].abs()), "dense")
    };
    let uh = rc.hessian_bound.unwrap_or(h_norm);
    let m = rc.effective_lipschitz();
    let r = rc.radius;
    let eps = rc.epsilon;
    let mut grad_bound = 2.0 * (uh + delta) * r.powi(3) + 0.5 * m * r * r + delta * r;
    if inexact {
        if let Some((sol, _)) = prev {
            grad_bound += sol.residual_norm() / sol.t.abs().max(f64::MIN_POSITIVE);
        }
    }
    let lambda_bound = -(2.0 * (uh + delta) * r * r + m * r + delta);
    let inexact_lambda_bound = if inexact {
        prev.map(|(sol, gk)| -2.0 * delta - 2.0 * gk * r - (uh + sol.dual) * r * r)
    } else {
        None
    };
    Ok(Certificate {
        grad_norm,
        grad_bound,
        lambda_min,
        lambda_bound,
        inexact_lambda_bound,
        c1: grad_bound / eps,
        c2: -lambda_bound / eps.sqrt(),
        lambda_method: method.to_string(),
        constants_known: rc.lipschitz.is_some() && rc.hessian_bound.is_some(),
        grad_ok: grad_norm <= grad_bound,
        curvature_ok: lambda_min >= lambda_bound,
    })
}

/// Exact or inexact HSODM according to `config.mode`.
pub fn hsodm_solve(problem: &dyn Objective, x0: &DVector<f64>, config: &SolverConfig) -> Result<SolveResult> {
    Run::new(problem, x0, config)?.execute(Phase::Global)
}

/// HSODM with Lanczos subproblem solves and the one-shot `delta` bump.
pub fn inexact_hsodm_solve(problem: &dyn Objective, x0: &DVector<f64>, config: &SolverConfig) -> Result<SolveResult> {
    if !config.is_inexact() {
        return Err(Error::Config("inexact_hsodm_solve needs Mode::Inexact".into()));
    }
    hsodm_solve(problem, x0, config)
}

/// Unit `delta = 0` steps from `x_start`. Falls back to the global loop if
/// the subproblem returns `t = 0`.
pub fn local_phase_solve(
    problem: &dyn Objective,
    x_start: &DVector<f64>,
    config: &SolverConfig,
) -> Result<SolveResult> {
    Run::new(problem, x_start, config)?.execute(Phase::Local)
}

enum StepResult {
    Continue,
    Certified(Certificate),
    Stall(String),
}

enum LocalResult {
    Done,
    Fallback,
}

struct Run<'a> {
    eval: Evaluator<'a>,
    config: &'a SolverConfig,
    rc: ResolvedConfig,
    rng: ChaCha8Rng,
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
    trace: Vec<IterationRecord>,
    outer: usize,
    local: usize,
    uh_running: f64,
    flat_steps: usize,
    stagnated: bool,
    optimum: Option<DVector<f64>>,
    start: Instant,
}

impl<'a> Run<'a> {
    fn new(problem: &'a dyn Objective, x0: &DVector<f64>, config: &'a SolverConfig) -> Result<Self> {
        let rc = config.resolve(&problem.constants())?;
        let n = problem.dim();
        if x0.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: x0.len(),
            });
        }
        if !config.is_inexact() {
            if !problem.has_hessian() {
                return Err(Error::Capability(format!(
                    "exact mode needs an explicit Hessian; problem `{}` only provides Hessian-vector products",
                    problem.name()
                )));
            }
            if n > config.dense_threshold {
                return Err(Error::Config(format!(
                    "n = {n} exceeds the dense threshold {}; use inexact mode",
                    config.dense_threshold
                )));
            }
        }
        let eval = Evaluator::new(problem);
        let f = eval.value(x0)?;
        let g = eval.gradient(x0)?;
        Ok(Run {
            eval,
            config,
            rc,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            x: x0.clone(),
            f,
            g,
            trace: Vec::new(),
            outer: 0,
            local: 0,
            uh_running: 0.0,
            flat_steps: 0,
            stagnated: false,
            optimum: problem.optimum().map(|o| o.x),
            start: Instant::now(),
        })
    }

    fn solver_name(&self) -> &'static str {
        if self.config.is_inexact() {
            "hsodm-hvp"
        } else {
            "hsodm"
        }
    }

    fn execute(mut self, first: Phase) -> Result<SolveResult> {
        let mut certificate = None;
        let mut message = None;
        let mut allow_local = self.config.local_phase == LocalPhase::ContinueWithDeltaZero;
        if first == Phase::Local {
            allow_local = true;
        }
        let mut enter_local = first == Phase::Local;
        let status = loop {
            if enter_local {
                enter_local = false;
                match self.local_phase() {
                    Ok(LocalResult::Done) => {
                        if let Some(c) = certificate.as_mut() {
                            self.refresh_certificate(c)?;
                        }
                        break match &certificate {
                            Some(c) if c.certified() => Status::SospCertified,
                            _ if self.g.norm() <= self.config.local_gtol => Status::GradientConverged,
                            _ => Status::MaxIters,
                        };
                    }
                    Ok(LocalResult::Fallback) => {
                        allow_local = false;
                        certificate = None;
                    }
                    Err(e) => {
                        message = Some(e.to_string());
                        break Status::NumericalError;
                    }
                }
            }
            if self.outer >= self.config.max_outer_iters {
                break Status::MaxIters;
            }
            if let Some(gt) = self.config.gtol {
                if self.g.norm() <= gt {
                    match self.curvature_at_current() {
                        Ok(lam) if lam >= -self.rc.epsilon.sqrt() => break Status::GradientConverged,
                        Ok(_) => {}
                        Err(e) => {
                            message = Some(e.to_string());
                            break Status::NumericalError;
                        }
                    }
                }
            }
            match self.global_step() {
                Ok(StepResult::Continue) => {
                    if self.stagnated {
                        break Status::MaxIters;
                    }
                }
                Ok(StepResult::Certified(c)) => {
                    certificate = Some(c);
                    if allow_local {
                        enter_local = true;
                    } else {
                        break Status::SospCertified;
                    }
                }
                Ok(StepResult::Stall(msg)) => {
                    message = Some(msg);
                    break Status::LineSearchStall;
                }
                Err(e) => {
                    message = Some(e.to_string());
                    break Status::NumericalError;
                }
            }
        };
        if status != Status::SospCertified {
            certificate = None;
        }
        Ok(SolveResult {
            solver: self.solver_name().to_string(),
            problem: self.eval.problem().name().to_string(),
            status,
            grad_norm: self.g.norm(),
            f_final: self.f,
            x_final: self.x,
            iterations: self.outer + self.local,
            local_iterations: self.local,
            certificate,
            counters: self.eval.counters(),
            wall_time_secs: self.start.elapsed().as_secs_f64(),
            stagnated: self.stagnated,
            message,
            trace: self.trace,
        })
    }

    /// Smallest Hessian eigenvalue at the current iterate.
    fn curvature_at_current(&mut self) -> Result<f64> {
        if self.rc.inexact.is_some() || !self.eval.problem().has_hessian() {
            let x = self.x.clone();
            let op = self.eval.hessian_operator(&x);
            leftmost_eigenvalue(&op, 1e-10, &mut self.rng)
        } else {
            let h = self.eval.hessian(&self.x)?;
            Ok(sorted_eigen(&h)?.0[0])
        }
    }

    fn dist(&self, x: &DVector<f64>) -> Option<f64> {
        self.optimum.as_ref().map(|o| (x - o).norm())
    }

    fn hessian_bound(&self) -> f64 {
        self.rc.hessian_bound.unwrap_or(self.uh_running)
    }

    /// Solves the homogenized subproblem at the current iterate. `tight`
    /// requests the bump accuracy (`e_k = eps^3`, full Krylov space).
    fn subproblem(&mut self, delta: f64, tight: bool) -> Result<SubproblemSolution> {
        let x = self.x.clone();
        match self.rc.inexact {
            None => {
                let h = self.eval.hessian(&x)?;
                let sys = homogenize(HessianOp::Dense(h), self.g.clone(), delta)?;
                solve_exact_with_threshold(&sys, self.config.dense_threshold)
            }
            Some(o) => {
                let n = x.len();
                let op = self.eval.hessian_operator(&x);
                let sys = homogenize(HessianOp::MatrixFree(&op), self.g.clone(), delta)?;
                let eps = self.rc.epsilon;
                let mut params = InexactParams::new(o.e_k.unwrap_or(eps.sqrt()), eps);
                params.p = o.p;
                params.psi = o.psi;
                params.j_min = o.j_min;
                params.hessian_bound = self.rc.hessian_bound;
                if tight {
                    params.e_k = eps.powi(3);
                    params.j_min = n + 1;
                }
                let out = solve_inexact(&sys, &params, &mut self.rng)?;
                self.uh_running = self.uh_running.max(out.budget.norm_est);
                Ok(out.solution)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        phase: Phase,
        sol: &SubproblemSolution,
        d_norm: f64,
        eta: f64,
        case: Option<StepCase>,
        ls_trials: usize,
        lanczos_iters: usize,
        before: &EvalCounters,
        f_next: f64,
        delta: f64,
        x_next: &DVector<f64>,
        note: &str,
    ) {
        let c = self.eval.counters().since(before);
        let k = self.outer + self.local;
        self.trace.push(IterationRecord {
            k,
            phase,
            f: self.f,
            grad_norm: self.g.norm(),
            t: sol.t,
            dual: sol.dual,
            d_norm,
            eta,
            case,
            ls_trials,
            lanczos_iters,
            n_f: c.n_f,
            n_g: c.n_g,
            n_h: c.n_h,
            n_hvp: c.n_hvp,
            residual_norm: sol.residual_norm(),
            seed: self.config.seed,
            f_next,
            delta,
            radius: self.rc.radius,
            dist_to_opt: self.dist(x_next),
            note: note.to_string(),
        });
    }

    fn accept(&mut self, x_next: DVector<f64>, f_next: f64, g_next: Option<DVector<f64>>) -> Result<()> {
        let drop = self.f - f_next;
        if drop < 1e-16 * (1.0 + self.f.abs()) {
            self.flat_steps += 1;
        } else {
            self.flat_steps = 0;
        }
        if self.flat_steps >= self.config.stagnation_window {
            self.stagnated = true;
        }
        let g = match g_next {
            Some(g) => g,
            None => self.eval.gradient(&x_next)?,
        };
        self.x = x_next;
        self.f = f_next;
        self.g = g;
        Ok(())
    }

    fn global_step(&mut self) -> Result<StepResult> {
        let before = self.eval.counters();
        let rc = self.rc.clone();
        let mut delta = rc.delta;
        let mut sol = self.subproblem(delta, false)?;
        let mut lanczos = sol.lanczos_iterations;
        let (mut d, mut case) = direction_from_solution(&sol, &self.g, rc.nu, rc.radius)?;
        let mut note = String::new();

        if case == StepCase::SmallValue && rc.inexact.is_some() && sol.r().norm() > rc.epsilon {
            let se = rc.epsilon.sqrt();
            delta = 3.0 * se + 2.0 * self.g.norm() * rc.radius + (self.hessian_bound() + sol.dual) * rc.radius.powi(2);
            sol = self.subproblem(delta, true)?;
            lanczos += sol.lanczos_iterations;
            (d, case) = direction_from_solution(&sol, &self.g, rc.nu, rc.radius)?;
            note.push_str("delta_bump");
        }
        self.outer += 1;
        let d_norm = d.norm();

        if case == StepCase::SmallValue {
            let x_next = &self.x + &d;
            let f_next = self.eval.value(&x_next)?;
            if f_next <= self.f {
                let g_next = self.eval.gradient(&x_next)?;
                let gk = self.g.norm();
                let cert = certify_at(
                    &self.eval,
                    &rc,
                    rc.inexact.is_some(),
                    &x_next,
                    g_next.norm(),
                    delta,
                    Some((&sol, gk)),
                    &mut self.rng,
                )?;
                let certified = cert.certified();
                if !certified {
                    push_note(&mut note, "uncertified_small_step");
                }
                self.record(
                    Phase::Global,
                    &sol,
                    d_norm,
                    1.0,
                    Some(case),
                    0,
                    lanczos,
                    &before,
                    f_next,
                    delta,
                    &x_next,
                    &note,
                );
                self.accept(x_next, f_next, Some(g_next))?;
                return Ok(if certified {
                    StepResult::Certified(cert)
                } else {
                    StepResult::Continue
                });
            }
            push_note(&mut note, "small_step_backtrack");
            let (beta, gamma) = match self.config.stepsize {
                Stepsize::Backtracking { beta, gamma } => (beta, gamma),
                Stepsize::FixedRadius => (0.5, 1.0),
            };
            let ls = backtrack(
                &self.eval,
                &self.x,
                self.f,
                &d,
                1.0,
                beta,
                gamma,
                self.config.max_ls_trials,
            )?;
            if !ls.accepted {
                return Ok(StepResult::Stall(format!(
                    "no decrease along the small-value direction after {} trials",
                    ls.trials + 1
                )));
            }
            let x_next = &self.x + &d * ls.eta;
            self.record(
                Phase::Global,
                &sol,
                d_norm,
                ls.eta,
                Some(case),
                ls.trials,
                lanczos,
                &before,
                ls.f_new,
                delta,
                &x_next,
                &note,
            );
            self.accept(x_next, ls.f_new, None)?;
            return Ok(StepResult::Continue);
        }

        let (eta, trials, f_next) = match self.config.stepsize {
            Stepsize::FixedRadius => {
                let eta = fixed_radius_stepsize(&d, rc.radius)?;
                let x_next = &self.x + &d * eta;
                let f_next = self.eval.value(&x_next)?;
                if f_next <= self.f {
                    (eta, 0, f_next)
                } else {
                    push_note(&mut note, "radius_backtrack");
                    let ls = backtrack(
                        &self.eval,
                        &self.x,
                        self.f,
                        &d,
                        eta * 0.5,
                        0.5,
                        0.0,
                        self.config.max_ls_trials,
                    )?;
                    if !ls.accepted || ls.decrease <= 0.0 {
                        return Ok(StepResult::Stall(format!(
                            "fixed-radius step increased f and {} halvings did not recover",
                            ls.trials + 1
                        )));
                    }
                    (ls.eta, ls.trials + 1, ls.f_new)
                }
            }
            Stepsize::Backtracking { beta, gamma } => {
                let cap = match rc.lipschitz {
                    Some(m) => line_search_cap(delta, rc.nu, m, beta, gamma),
                    None => self.config.max_ls_trials,
                };
                let ls = backtrack(&self.eval, &self.x, self.f, &d, 1.0, beta, gamma, cap)?;
                if !ls.accepted {
                    return Ok(StepResult::Stall(format!("line search exceeded its trial cap {cap}")));
                }
                (ls.eta, ls.trials, ls.f_new)
            }
        };
        let x_next = &self.x + &d * eta;
        self.record(
            Phase::Global,
            &sol,
            d_norm,
            eta,
            Some(case),
            trials,
            lanczos,
            &before,
            f_next,
            delta,
            &x_next,
            &note,
        );
        self.accept(x_next, f_next, None)?;
        Ok(StepResult::Continue)
    }

    fn local_phase(&mut self) -> Result<LocalResult> {
        for _ in 0..self.config.max_local_iters {
            if self.g.norm() <= self.config.local_gtol {
                return Ok(LocalResult::Done);
            }
            let before = self.eval.counters();
            let sol = self.subproblem(0.0, true)?;
            if sol.t.abs() <= LOCAL_T_TOL {
                let x = self.x.clone();
                self.record(
                    Phase::Local,
                    &sol,
                    0.0,
                    0.0,
                    None,
                    0,
                    sol.lanczos_iterations,
                    &before,
                    self.f,
                    0.0,
                    &x,
                    "local_fallback",
                );
                return Ok(LocalResult::Fallback);
            }
            let d = &sol.v / sol.t;
            let x_next = &self.x + &d;
            let f_next = self.eval.value(&x_next)?;
            if !(f_next <= self.f) {
                return Ok(LocalResult::Done);
            }
            self.local += 1;
            self.record(
                Phase::Local,
                &sol,
                d.norm(),
                1.0,
                None,
                0,
                sol.lanczos_iterations,
                &before,
                f_next,
                0.0,
                &x_next,
                "",
            );
            self.accept(x_next, f_next, None)?;
            if self.stagnated {
                self.stagnated = false;
                return Ok(LocalResult::Done);
            }
        }
        Ok(LocalResult::Done)
    }

    /// Re-evaluates the certificate at the end of the local phase with the
    /// bounds of the certified step.
    fn refresh_certificate(&mut self, c: &mut Certificate) -> Result<()> {
        let rc = self.rc.clone();
        let x = self.x.clone();
        let fresh = certify_at(
            &self.eval,
            &rc,
            rc.inexact.is_some(),
            &x,
            self.g.norm(),
            rc.delta,
            None,
            &mut self.rng,
        )?;
        c.grad_norm = fresh.grad_norm;
        c.lambda_min = fresh.lambda_min;
        c.grad_ok = c.grad_norm <= c.grad_bound;
        c.curvature_ok = c.lambda_min >= c.lambda_bound;
        Ok(())
    }
}

fn push_note(note: &mut String, s: &str) {
    if !note.is_empty() {
        note.push(';');
    }
    note.push_str(s);
}
