//! Objective-function abstraction, instrumented evaluation, derivative
//! checking and the built-in problem suite.

mod suite;

use std::cell::{Cell, RefCell};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{bit_key, SymmetricOperator};

pub use suite::{
    make_problem, parse_problem_id, ConvexQuartic, NonconvexQuartic, PowellSingular, Quadratic, Rosenbrock, Saddle,
    SUITE_NAMES,
};

/// Optional problem constants used by the theory-driven defaults and checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KnownConstants {
    /// Lipschitz constant of the Hessian on the region the iterates visit.
    pub hessian_lipschitz: Option<f64>,
    /// Bound on the Hessian spectral norm at the iterates.
    pub hessian_bound: Option<f64>,
    /// Bound on the gradient norm at the iterates.
    pub gradient_bound: Option<f64>,
    pub f_lower: Option<f64>,
    /// Local strong-convexity modulus around the known optimum.
    pub strong_convexity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub x: DVector<f64>,
    pub f: f64,
}

/// A twice continuously differentiable objective.
///
/// Implementations must be pure functions of `x` and provide at least one of
/// [`Objective::hessian`] or [`Objective::hvp`].
pub trait Objective: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn has_hessian(&self) -> bool {
        false
    }
    fn has_hvp(&self) -> bool {
        false
    }
    fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
    fn hvp(&self, _x: &DVector<f64>, _v: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    fn constants(&self) -> KnownConstants {
        KnownConstants::default()
    }
    fn optimum(&self) -> Option<KnownOptimum> {
        None
    }
    fn standard_start(&self) -> DVector<f64> {
        DVector::zeros(self.dim())
    }
}

type ValueFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatrixFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
type HvpFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Closure-backed objective for user-supplied problems.
pub struct FnProblem {
    name: String,
    dim: usize,
    value_fn: ValueFn,
    gradient_fn: VectorFn,
    hessian_fn: Option<MatrixFn>,
    hvp_fn: Option<HvpFn>,
    constants: KnownConstants,
    optimum: Option<KnownOptimum>,
    start: Option<DVector<f64>>,
}

impl FnProblem {
    pub fn builder(
        name: impl Into<String>,
        dim: usize,
        value_fn: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient_fn: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> FnProblemBuilder {
        FnProblemBuilder {
            inner: FnProblem {
                name: name.into(),
                dim,
                value_fn: Box::new(value_fn),
                gradient_fn: Box::new(gradient_fn),
                hessian_fn: None,
                hvp_fn: None,
                constants: KnownConstants::default(),
                optimum: None,
                start: None,
            },
        }
    }
}

pub struct FnProblemBuilder {
    inner: FnProblem,
}

impl FnProblemBuilder {
    pub fn hessian(mut self, f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.inner.hessian_fn = Some(Box::new(f));
        self
    }

    pub fn hvp(mut self, f: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.inner.hvp_fn = Some(Box::new(f));
        self
    }

    pub fn constants(mut self, c: KnownConstants) -> Self {
        self.inner.constants = c;
        self
    }

    pub fn optimum(mut self, x: DVector<f64>, f: f64) -> Self {
        self.inner.optimum = Some(KnownOptimum { x, f });
        self
    }

    pub fn start(mut self, x: DVector<f64>) -> Self {
        self.inner.start = Some(x);
        self
    }

    pub fn build(self) -> Result<FnProblem> {
        let p = self.inner;
        if p.dim == 0 {
            return Err(Error::Config("problem dimension must be positive".into()));
        }
        if p.hessian_fn.is_none() && p.hvp_fn.is_none() {
            return Err(Error::Capability(format!(
                "problem `{}` provides neither a Hessian nor a Hessian-vector product",
                p.name
            )));
        }
        Ok(p)
    }
}

impl Objective for FnProblem {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value_fn)(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient_fn)(x)
    }
    fn has_hessian(&self) -> bool {
        self.hessian_fn.is_some()
    }
    fn has_hvp(&self) -> bool {
        self.hvp_fn.is_some()
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.hessian_fn.as_ref().map(|h| h(x))
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Option<DVector<f64>> {
        self.hvp_fn.as_ref().map(|h| h(x, v))
    }
    fn constants(&self) -> KnownConstants {
        self.constants
    }
    fn optimum(&self) -> Option<KnownOptimum> {
        self.optimum.clone()
    }
    fn standard_start(&self) -> DVector<f64> {
        self.start.clone().unwrap_or_else(|| DVector::zeros(self.dim))
    }
}

/// Evaluation counts for one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounters {
    pub n_f: u64,
    pub n_g: u64,
    pub n_h: u64,
    pub n_hvp: u64,
}

impl EvalCounters {
    pub fn since(&self, earlier: &EvalCounters) -> EvalCounters {
        EvalCounters {
            n_f: self.n_f - earlier.n_f,
            n_g: self.n_g - earlier.n_g,
            n_h: self.n_h - earlier.n_h,
            n_hvp: self.n_hvp - earlier.n_hvp,
        }
    }
}

/// Per-solve evaluation front-end: validates inputs, rejects non-finite
/// outputs, counts callbacks and memoizes the Hessian on the exact bit
/// pattern of `x`.
pub struct Evaluator<'a> {
    problem: &'a dyn Objective,
    counters: Cell<EvalCounters>,
    hessian_memo: RefCell<Option<(Vec<u64>, DMatrix<f64>)>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a dyn Objective) -> Self {
        Self {
            problem,
            counters: Cell::new(EvalCounters::default()),
            hessian_memo: RefCell::new(None),
        }
    }

    pub fn problem(&self) -> &'a dyn Objective {
        self.problem
    }

    pub fn dim(&self) -> usize {
        self.problem.dim()
    }

    pub fn counters(&self) -> EvalCounters {
        self.counters.get()
    }

    fn bump(&self, f: impl FnOnce(&mut EvalCounters)) {
        let mut c = self.counters.get();
        f(&mut c);
        self.counters.set(c);
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "input",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_input(x)?;
        self.bump(|c| c.n_f += 1);
        let f = self.problem.value(x);
        if !f.is_finite() {
            return Err(Error::Evaluation {
                what: "value",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(f)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        self.bump(|c| c.n_g += 1);
        let g = self.problem.gradient(x);
        if g.len() != self.dim() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "gradient",
                x: x.as_slice().to_vec(),
            });
        }
        Ok(g)
    }

    /// Dense Hessian, memoized per bit pattern of `x`; counts one `n_h` per
    /// distinct point.
    pub fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let key = bit_key(x);
        if let Some((k, h)) = self.hessian_memo.borrow().as_ref() {
            if *k == key {
                return Ok(h.clone());
            }
        }
        if !self.problem.has_hessian() {
            return Err(Error::Capability(format!(
                "problem `{}` has no Hessian",
                self.problem.name()
            )));
        }
        self.bump(|c| c.n_h += 1);
        let h = self
            .problem
            .hessian(x)
            .ok_or_else(|| Error::Capability(format!("problem `{}` has no Hessian", self.problem.name())))?;
        let n = self.dim();
        if h.nrows() != n || h.ncols() != n || h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation {
                what: "hessian",
                x: x.as_slice().to_vec(),
            });
        }
        *self.hessian_memo.borrow_mut() = Some((key, h.clone()));
        Ok(h)
    }

    /// Hessian-vector product; falls back to the memoized dense Hessian when
    /// the problem has no native product.
    pub fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        if self.problem.has_hvp() {
            self.bump(|c| c.n_hvp += 1);
            let hv = self.problem.hvp(x, v).ok_or_else(|| {
                Error::Capability(format!(
                    "problem `{}` has no Hessian-vector product",
                    self.problem.name()
                ))
            })?;
            if hv.len() != self.dim() || hv.iter().any(|t| !t.is_finite()) {
                return Err(Error::Evaluation {
                    what: "hessian-vector product",
                    x: x.as_slice().to_vec(),
                });
            }
            Ok(hv)
        } else if self.problem.has_hessian() {
            Ok(self.hessian(x)? * v)
        } else {
            Err(Error::Capability(format!(
                "problem `{}` has no Hessian or Hessian-vector product",
                self.problem.name()
            )))
        }
    }

    /// The Hessian at `x` as a matrix-free operator.
    pub fn hessian_operator<'e>(&'e self, x: &'e DVector<f64>) -> HessianAt<'e, 'a> {
        HessianAt { eval: self, x }
    }
}

/// `v -> H(x) v` through an [`Evaluator`].
pub struct HessianAt<'e, 'a> {
    eval: &'e Evaluator<'a>,
    x: &'e DVector<f64>,
}

impl SymmetricOperator for HessianAt<'_, '_> {
    fn dim(&self) -> usize {
        self.eval.dim()
    }
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.eval.hvp(self.x, v)
    }
}

pub fn evaluate_value(problem: &dyn Objective, x: &DVector<f64>) -> Result<f64> {
    Evaluator::new(problem).value(x)
}

pub fn evaluate_gradient(problem: &dyn Objective, x: &DVector<f64>) -> Result<DVector<f64>> {
    Evaluator::new(problem).gradient(x)
}

pub fn hessian_vector_product(problem: &dyn Objective, x: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    Evaluator::new(problem).hvp(x, v)
}

/// Outcome of [`check_derivatives`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub step: f64,
    pub tolerance: f64,
    pub gradient_max_rel_err: f64,
    /// Per-component relative error of the central-difference gradient.
    pub gradient_rel_err: Vec<f64>,
    pub hessian_max_rel_err: Option<f64>,
    pub hvp_max_rel_err: Option<f64>,
    /// Relative disagreement of `hessian(x) v` and `hvp(x, v)` on a probe.
    pub hessian_hvp_consistency: Option<f64>,
    pub gradient_ok: bool,
    pub hessian_ok: bool,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.gradient_ok && self.hessian_ok
    }
}

pub const DEFAULT_DERIVATIVE_TOL: f64 = 1e-5;

fn rel_err(approx: f64, exact: f64) -> f64 {
    (approx - exact).abs() / exact.abs().max(1.0)
}

/// Central-difference checks of the gradient (from values) and of the
/// Hessian and/or HVP (from gradients), with relative errors scaled by
/// `max(1, |exact|)`.
pub fn check_derivatives(problem: &dyn Objective, x: &DVector<f64>, h: f64) -> DerivativeReport {
    check_derivatives_with_tol(problem, x, h, DEFAULT_DERIVATIVE_TOL)
}

pub fn check_derivatives_with_tol(problem: &dyn Objective, x: &DVector<f64>, h: f64, tol: f64) -> DerivativeReport {
    let n = problem.dim();
    let g = problem.gradient(x);
    let mut grad_err = vec![0.0; n];
    let mut xp = x.clone();
    for i in 0..n {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = problem.value(&xp);
        xp[i] = xi - h;
        let fm = problem.value(&xp);
        xp[i] = xi;
        let fd = (fp - fm) / (2.0 * h);
        grad_err[i] = rel_err(fd, g[i]);
    }
    let gmax = grad_err
        .iter()
        .cloned()
        .fold(0.0_f64, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });

    // Columns of the Hessian from central differences of the gradient.
    let mut fd_cols = Vec::with_capacity(n);
    if problem.has_hessian() || problem.has_hvp() {
        for j in 0..n {
            let xj = x[j];
            xp[j] = xj + h;
            let gp = problem.gradient(&xp);
            xp[j] = xj - h;
            let gm = problem.gradient(&xp);
            xp[j] = xj;
            fd_cols.push((gp - gm) / (2.0 * h));
        }
    }

    let max_col_err = |col_of: &dyn Fn(usize) -> DVector<f64>| -> f64 {
        let mut worst = 0.0_f64;
        for (j, fd) in fd_cols.iter().enumerate() {
            let exact = col_of(j);
            for i in 0..n {
                let e = rel_err(fd[i], exact[i]);
                worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
            }
        }
        worst
    };

    let hess = problem.hessian(x);
    let hessian_max_rel_err = hess.as_ref().map(|hm| max_col_err(&|j| hm.column(j).into_owned()));
    let hvp_max_rel_err = if problem.has_hvp() {
        Some(max_col_err(&|j| {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            problem.hvp(x, &e).unwrap_or_else(|| DVector::from_element(n, f64::NAN))
        }))
    } else {
        None
    };
    let consistency = match (&hess, problem.has_hvp()) {
        (Some(hm), true) => {
            let v = DVector::from_fn(n, |i, _| ((i as f64 + 1.0) * 0.7548776662).sin());
            let a = hm * &v;
            problem.hvp(x, &v).map(|b| (&a - &b).norm() / a.norm().max(1.0))
        }
        _ => None,
    };

    let hessian_ok = [hessian_max_rel_err, hvp_max_rel_err]
        .iter()
        .flatten()
        .all(|&e| e <= tol)
        && (hessian_max_rel_err.is_some() || hvp_max_rel_err.is_some())
        && consistency.is_none_or(|c| c <= 1e-10);

    DerivativeReport {
        step: h,
        tolerance: tol,
        gradient_max_rel_err: gmax,
        gradient_rel_err: grad_err,
        hessian_max_rel_err,
        hvp_max_rel_err,
        hessian_hvp_consistency: consistency,
        gradient_ok: gmax <= tol,
        hessian_ok,
    }
}
