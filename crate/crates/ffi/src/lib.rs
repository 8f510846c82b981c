//! C ABI for the `hsodm` optimization library.
//!
//! Objects cross the boundary as opaque handles (`HsodmProblem`,
//! `HsodmConfig`, `HsodmResult`) that the caller releases with the matching
//! `*_free` function. Fallible calls return an [`HsodmErrorCode`]; the message
//! of the most recent failure on the calling thread is available from
//! [`hsodm_last_error_message`]. Panics never unwind into C.
//!
//! Dense matrices are column-major. Because every Hessian here is symmetric,
//! row-major buffers work too.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hsodm::baselines::{cubic_reg_solve, newton_tr_solve, CubicRegConfig, TrustRegionConfig};
use hsodm::bench::scaled_geometric_mean;
use hsodm::problem::{make_problem, FnProblem, Objective};
use hsodm::solver::{hsodm_solve as run_hsodm, LocalPhase, SolveResult, SolverConfig, Status, Stepsize};
use hsodm::Error;
use nalgebra::{DMatrix, DVector};

/// Return code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsodmErrorCode {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Capability = 4,
    Config = 5,
    Evaluation = 6,
    Numerical = 7,
    Domain = 8,
    Io = 9,
    Panic = 10,
}

/// Termination status of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsodmStatus {
    SospCertified = 0,
    GradientConverged = 1,
    MaxIters = 2,
    LineSearchStall = 3,
    NumericalError = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsodmBaseline {
    NewtonTrustRegion = 0,
    CubicRegularization = 1,
}

/// Evaluation counts of a solve.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HsodmCounters {
    pub n_f: u64,
    pub n_g: u64,
    pub n_h: u64,
    pub n_hvp: u64,
}

/// `f(x)`.
pub type HsodmValueFn = Option<unsafe extern "C" fn(x: *const f64, n: usize, user: *mut c_void) -> f64>;
/// Writes `grad f(x)` into `out[0..n]`.
pub type HsodmGradientFn = Option<unsafe extern "C" fn(x: *const f64, n: usize, out: *mut f64, user: *mut c_void)>;
/// Writes the Hessian at `x` into `out[0..n*n]`.
pub type HsodmHessianFn = Option<unsafe extern "C" fn(x: *const f64, n: usize, out: *mut f64, user: *mut c_void)>;
/// Writes `H(x) v` into `out[0..n]`.
pub type HsodmHvpFn =
    Option<unsafe extern "C" fn(x: *const f64, v: *const f64, n: usize, out: *mut f64, user: *mut c_void)>;

/// Opaque objective.
pub struct HsodmProblem {
    inner: Box<dyn Objective>,
}

/// Opaque HSODM configuration.
pub struct HsodmConfig {
    inner: SolverConfig,
}

/// Opaque solve result.
pub struct HsodmResult {
    inner: SolveResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn code_of(e: &Error) -> HsodmErrorCode {
    match e {
        Error::Evaluation { .. } => HsodmErrorCode::Evaluation,
        Error::Dimension { .. } => HsodmErrorCode::Dimension,
        Error::Capability(_) => HsodmErrorCode::Capability,
        Error::Config(_) => HsodmErrorCode::Config,
        Error::Numerical(_) => HsodmErrorCode::Numerical,
        Error::Domain(_) => HsodmErrorCode::Domain,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => HsodmErrorCode::Io,
    }
}

fn fail(code: HsodmErrorCode, msg: impl Into<String>) -> HsodmErrorCode {
    set_last_error(msg);
    code
}

/// Runs `f`, turning errors and panics into codes.
fn guard(f: impl FnOnce() -> Result<(), HsodmErrorCode>) -> HsodmErrorCode {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsodmErrorCode::Ok,
        Ok(Err(code)) => code,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            fail(HsodmErrorCode::Panic, format!("panic: {msg}"))
        }
    }
}

fn lift<T>(r: hsodm::Result<T>) -> Result<T, HsodmErrorCode> {
    r.map_err(|e| fail(code_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), HsodmErrorCode> {
    if p.is_null() {
        Err(fail(HsodmErrorCode::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn config_mut<'a>(config: *mut HsodmConfig) -> Result<&'a mut SolverConfig, HsodmErrorCode> {
    non_null(config, "config")?;
    Ok(&mut (*config).inner)
}

fn write_out<T>(out: *mut *mut T, value: T) {
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

unsafe fn read_vector(x: *const f64, n: usize) -> DVector<f64> {
    DVector::from_column_slice(std::slice::from_raw_parts(x, n))
}

/// Last error message on this thread, or NULL. Valid until the next call
/// into this library on the same thread.
#[no_mangle]
pub extern "C" fn hsodm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a suite problem (`"rosenbrock"`, `"saddle"`, ...). `n = 0` takes
/// the family's default dimension.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsodm_problem_from_name(
    name: *const c_char,
    n: usize,
    out: *mut *mut HsodmProblem,
) -> HsodmErrorCode {
    guard(|| {
        non_null(name, "name")?;
        non_null(out, "out")?;
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| fail(HsodmErrorCode::InvalidArgument, "name is not UTF-8"))?;
        let (family, dim) = if n == 0 {
            lift(hsodm::problem::parse_problem_id(name))?
        } else {
            (name.to_string(), n)
        };
        let inner = lift(make_problem(&family, dim))?;
        write_out(out, HsodmProblem { inner });
        Ok(())
    })
}

#[derive(Clone, Copy)]
struct UserData(*mut c_void);

// The caller promises callbacks and `user` may be used from the solving
// thread.
unsafe impl Send for UserData {}
unsafe impl Sync for UserData {}

impl UserData {
    fn get(&self) -> *mut c_void {
        self.0
    }
}

/// Builds a problem from C callbacks. `value` and `gradient` are required,
/// plus at least one of `hessian` and `hvp`. Non-finite callback output is
/// reported as an evaluation error by the solvers.
///
/// # Safety
/// The callbacks must be safe to call with `user` for as long as the
/// problem lives, and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsodm_problem_from_callbacks(
    n: usize,
    value: HsodmValueFn,
    gradient: HsodmGradientFn,
    hessian: HsodmHessianFn,
    hvp: HsodmHvpFn,
    user: *mut c_void,
    out: *mut *mut HsodmProblem,
) -> HsodmErrorCode {
    guard(|| {
        non_null(out, "out")?;
        let (Some(value), Some(gradient)) = (value, gradient) else {
            return Err(fail(
                HsodmErrorCode::NullPointer,
                "value and gradient callbacks are required",
            ));
        };
        let ud = UserData(user);
        let mut b = FnProblem::builder(
            "c-callbacks",
            n,
            move |x| unsafe { value(x.as_ptr(), x.len(), ud.get()) },
            move |x| {
                let mut g = DVector::from_element(x.len(), f64::NAN);
                unsafe { gradient(x.as_ptr(), x.len(), g.as_mut_ptr(), ud.get()) };
                g
            },
        );
        if let Some(h) = hessian {
            b = b.hessian(move |x| {
                let n = x.len();
                let mut m = DMatrix::from_element(n, n, f64::NAN);
                unsafe { h(x.as_ptr(), n, m.as_mut_ptr(), ud.get()) };
                m
            });
        }
        if let Some(hv) = hvp {
            b = b.hvp(move |x, v| {
                let mut o = DVector::from_element(x.len(), f64::NAN);
                unsafe { hv(x.as_ptr(), v.as_ptr(), x.len(), o.as_mut_ptr(), ud.get()) };
                o
            });
        }
        let p = lift(b.build())?;
        write_out(out, HsodmProblem { inner: Box::new(p) });
        Ok(())
    })
}

/// Dimension of `problem`, or 0 for NULL.
///
/// # Safety
/// `problem` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_problem_dim(problem: *const HsodmProblem) -> usize {
    if problem.is_null() {
        0
    } else {
        (*problem).inner.dim()
    }
}

/// Copies the problem's standard starting point into `out[0..len]`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hsodm_problem_standard_start(
    problem: *const HsodmProblem,
    out: *mut f64,
    len: usize,
) -> HsodmErrorCode {
    guard(|| {
        non_null(problem, "problem")?;
        non_null(out, "out")?;
        let x = (*problem).inner.standard_start();
        if len != x.len() {
            return Err(fail(
                HsodmErrorCode::Dimension,
                format!("expected {} entries, got {len}", x.len()),
            ));
        }
        ptr::copy_nonoverlapping(x.as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `problem` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hsodm_problem_free(problem: *mut HsodmProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// New configuration with tolerance `epsilon`. `inexact != 0` selects the
/// Lanczos (Hessian-vector product) mode.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsodm_config_new(epsilon: f64, inexact: i32, out: *mut *mut HsodmConfig) -> HsodmErrorCode {
    guard(|| {
        non_null(out, "out")?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(fail(
                HsodmErrorCode::Config,
                format!("epsilon must be positive, got {epsilon}"),
            ));
        }
        let inner = if inexact != 0 {
            SolverConfig::inexact(epsilon)
        } else {
            SolverConfig::new(epsilon)
        };
        write_out(out, HsodmConfig { inner });
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hsodm_config_free(config: *mut HsodmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_config_set_max_iters(config: *mut HsodmConfig, max_iters: usize) -> HsodmErrorCode {
    guard(|| {
        if max_iters == 0 {
            return Err(fail(HsodmErrorCode::Config, "max_iters must be positive"));
        }
        config_mut(config)?.max_outer_iters = max_iters;
        Ok(())
    })
}

/// Stop once `||g|| <= gtol` (with no strong negative curvature). A
/// non-positive value disables the test.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_config_set_gtol(config: *mut HsodmConfig, gtol: f64) -> HsodmErrorCode {
    guard(|| {
        config_mut(config)?.gtol = (gtol > 0.0).then_some(gtol);
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_config_set_seed(config: *mut HsodmConfig, seed: u64) -> HsodmErrorCode {
    guard(|| {
        config_mut(config)?.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_config_set_fixed_radius(config: *mut HsodmConfig) -> HsodmErrorCode {
    guard(|| {
        config_mut(config)?.stepsize = Stepsize::FixedRadius;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_config_set_backtracking(
    config: *mut HsodmConfig,
    beta: f64,
    gamma: f64,
) -> HsodmErrorCode {
    guard(|| {
        if !(beta > 0.0 && beta < 1.0) || !(gamma > 0.0) {
            return Err(fail(
                HsodmErrorCode::Config,
                format!("need 0 < beta < 1 and gamma > 0, got {beta}, {gamma}"),
            ));
        }
        config_mut(config)?.stepsize = Stepsize::Backtracking { beta, gamma };
        Ok(())
    })
}

/// `enabled != 0` continues with `delta = 0` unit steps after certification.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_config_set_local_phase(config: *mut HsodmConfig, enabled: i32) -> HsodmErrorCode {
    guard(|| {
        config_mut(config)?.local_phase = if enabled != 0 {
            LocalPhase::ContinueWithDeltaZero
        } else {
            LocalPhase::Stop
        };
        Ok(())
    })
}

/// Overrides `delta`, the radius and `nu`. Pass a negative value (or NaN)
/// to keep the default of a parameter.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_config_set_parameters(
    config: *mut HsodmConfig,
    delta: f64,
    radius: f64,
    nu: f64,
) -> HsodmErrorCode {
    guard(|| {
        let c = config_mut(config)?;
        let pick = |v: f64| (v >= 0.0).then_some(v);
        c.delta = pick(delta);
        c.radius = pick(radius);
        c.nu = pick(nu);
        Ok(())
    })
}

/// Runs HSODM from `x0[0..n]`.
///
/// # Safety
/// Handles must be live, `x0` must hold `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hsodm_solve(
    problem: *const HsodmProblem,
    x0: *const f64,
    n: usize,
    config: *const HsodmConfig,
    out: *mut *mut HsodmResult,
) -> HsodmErrorCode {
    guard(|| {
        non_null(problem, "problem")?;
        non_null(x0, "x0")?;
        non_null(config, "config")?;
        non_null(out, "out")?;
        let x0 = read_vector(x0, n);
        let inner = lift(run_hsodm((*problem).inner.as_ref(), &x0, &(*config).inner))?;
        write_out(out, HsodmResult { inner });
        Ok(())
    })
}

/// Runs a baseline solver from `x0[0..n]` until `||g|| <= gtol` or
/// `max_iters` iterations.
///
/// # Safety
/// `problem` must be live, `x0` must hold `n` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hsodm_baseline_solve(
    problem: *const HsodmProblem,
    kind: HsodmBaseline,
    x0: *const f64,
    n: usize,
    gtol: f64,
    max_iters: usize,
    out: *mut *mut HsodmResult,
) -> HsodmErrorCode {
    guard(|| {
        non_null(problem, "problem")?;
        non_null(x0, "x0")?;
        non_null(out, "out")?;
        if !(gtol > 0.0) || max_iters == 0 {
            return Err(fail(HsodmErrorCode::Config, "gtol and max_iters must be positive"));
        }
        let x0 = read_vector(x0, n);
        let p = (*problem).inner.as_ref();
        let inner = match kind {
            HsodmBaseline::NewtonTrustRegion => lift(newton_tr_solve(
                p,
                &x0,
                &TrustRegionConfig {
                    gtol,
                    max_iters,
                    ..Default::default()
                },
            ))?,
            HsodmBaseline::CubicRegularization => lift(cubic_reg_solve(
                p,
                &x0,
                &CubicRegConfig {
                    gtol,
                    max_iters,
                    ..Default::default()
                },
            ))?,
        };
        write_out(out, HsodmResult { inner });
        Ok(())
    })
}

fn status_code(s: Status) -> HsodmStatus {
    match s {
        Status::SospCertified => HsodmStatus::SospCertified,
        Status::GradientConverged => HsodmStatus::GradientConverged,
        Status::MaxIters => HsodmStatus::MaxIters,
        Status::LineSearchStall => HsodmStatus::LineSearchStall,
        Status::NumericalError => HsodmStatus::NumericalError,
    }
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_result_status(result: *const HsodmResult) -> HsodmStatus {
    if result.is_null() {
        return HsodmStatus::NumericalError;
    }
    status_code((*result).inner.status)
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_result_iterations(result: *const HsodmResult) -> usize {
    if result.is_null() {
        return 0;
    }
    (*result).inner.iterations
}

/// Final objective value (NaN for NULL).
///
/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_result_f(result: *const HsodmResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    (*result).inner.f_final
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_result_grad_norm(result: *const HsodmResult) -> f64 {
    if result.is_null() {
        return f64::NAN;
    }
    (*result).inner.grad_norm
}

/// # Safety
/// `result` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hsodm_result_dim(result: *const HsodmResult) -> usize {
    if result.is_null() {
        return 0;
    }
    (*result).inner.x_final.len()
}

/// Copies the final iterate into `out[0..len]`.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hsodm_result_x(result: *const HsodmResult, out: *mut f64, len: usize) -> HsodmErrorCode {
    guard(|| {
        non_null(result, "result")?;
        non_null(out, "out")?;
        let x = &(*result).inner.x_final;
        if len != x.len() {
            return Err(fail(
                HsodmErrorCode::Dimension,
                format!("expected {} entries, got {len}", x.len()),
            ));
        }
        ptr::copy_nonoverlapping(x.as_ptr(), out, len);
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsodm_result_counters(result: *const HsodmResult, out: *mut HsodmCounters) -> HsodmErrorCode {
    guard(|| {
        non_null(result, "result")?;
        non_null(out, "out")?;
        let c = (*result).inner.counters;
        *out = HsodmCounters {
            n_f: c.n_f,
            n_g: c.n_g,
            n_h: c.n_h,
            n_hvp: c.n_hvp,
        };
        Ok(())
    })
}

/// Serializes the full result (trace included) as JSON into a new string
/// released with [`hsodm_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hsodm_result_to_json(result: *const HsodmResult, out: *mut *mut c_char) -> HsodmErrorCode {
    guard(|| {
        non_null(result, "result")?;
        non_null(out, "out")?;
        let json = lift((*result).inner.to_json())?;
        let s = CString::new(json).map_err(|_| fail(HsodmErrorCode::Io, "JSON contains a NUL byte"))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hsodm_result_free(result: *mut HsodmResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hsodm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `exp(mean(ln(v + shift))) - shift` over `values[0..len]`.
///
/// # Safety
/// `values` must hold `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hsodm_scaled_geometric_mean(
    values: *const f64,
    len: usize,
    shift: f64,
    out: *mut f64,
) -> HsodmErrorCode {
    guard(|| {
        non_null(out, "out")?;
        let vals: &[f64] = if len == 0 {
            &[]
        } else {
            non_null(values, "values")?;
            std::slice::from_raw_parts(values, len)
        };
        *out = lift(scaled_geometric_mean(vals, shift))?;
        Ok(())
    })
}
