#ifndef HSODM_H
#define HSODM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Return code of every fallible call.
 */
typedef enum HsodmErrorCode {
  HSODM_ERROR_CODE_OK = 0,
  HSODM_ERROR_CODE_NULL_POINTER = 1,
  HSODM_ERROR_CODE_INVALID_ARGUMENT = 2,
  HSODM_ERROR_CODE_DIMENSION = 3,
  HSODM_ERROR_CODE_CAPABILITY = 4,
  HSODM_ERROR_CODE_CONFIG = 5,
  HSODM_ERROR_CODE_EVALUATION = 6,
  HSODM_ERROR_CODE_NUMERICAL = 7,
  HSODM_ERROR_CODE_DOMAIN = 8,
  HSODM_ERROR_CODE_IO = 9,
  HSODM_ERROR_CODE_PANIC = 10,
} HsodmErrorCode;

typedef enum HsodmBaseline {
  HSODM_BASELINE_NEWTON_TRUST_REGION = 0,
  HSODM_BASELINE_CUBIC_REGULARIZATION = 1,
} HsodmBaseline;

/**
 * Termination status of a solve.
 */
typedef enum HsodmStatus {
  HSODM_STATUS_SOSP_CERTIFIED = 0,
  HSODM_STATUS_GRADIENT_CONVERGED = 1,
  HSODM_STATUS_MAX_ITERS = 2,
  HSODM_STATUS_LINE_SEARCH_STALL = 3,
  HSODM_STATUS_NUMERICAL_ERROR = 4,
} HsodmStatus;

/**
 * Opaque HSODM configuration.
 */
typedef struct HsodmConfig HsodmConfig;

/**
 * Opaque objective.
 */
typedef struct HsodmProblem HsodmProblem;

/**
 * Opaque solve result.
 */
typedef struct HsodmResult HsodmResult;

/**
 * `f(x)`.
 */
typedef double (*HsodmValueFn)(const double *x, size_t n, void *user);

/**
 * Writes `grad f(x)` into `out[0..n]`.
 */
typedef void (*HsodmGradientFn)(const double *x, size_t n, double *out, void *user);

/**
 * Writes the Hessian at `x` into `out[0..n*n]`.
 */
typedef void (*HsodmHessianFn)(const double *x, size_t n, double *out, void *user);

/**
 * Writes `H(x) v` into `out[0..n]`.
 */
typedef void (*HsodmHvpFn)(const double *x, const double *v, size_t n, double *out, void *user);

/**
 * Evaluation counts of a solve.
 */
typedef struct HsodmCounters {
  uint64_t n_f;
  uint64_t n_g;
  uint64_t n_h;
  uint64_t n_hvp;
} HsodmCounters;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or NULL. Valid until the next call
 * into this library on the same thread.
 */
const char *hsodm_last_error_message(void);

/**
 * Builds a suite problem (`"rosenbrock"`, `"saddle"`, ...). `n = 0` takes
 * the family's default dimension.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum HsodmErrorCode hsodm_problem_from_name(const char *name, size_t n, struct HsodmProblem **out);

/**
 * Builds a problem from C callbacks. `value` and `gradient` are required,
 * plus at least one of `hessian` and `hvp`. Non-finite callback output is
 * reported as an evaluation error by the solvers.
 *
 * # Safety
 * The callbacks must be safe to call with `user` for as long as the
 * problem lives, and `out` must be a valid pointer.
 */
enum HsodmErrorCode hsodm_problem_from_callbacks(size_t n,
                                                 HsodmValueFn value,
                                                 HsodmGradientFn gradient,
                                                 HsodmHessianFn hessian,
                                                 HsodmHvpFn hvp,
                                                 void *user,
                                                 struct HsodmProblem **out);

/**
 * Dimension of `problem`, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t hsodm_problem_dim(const struct HsodmProblem *problem);

/**
 * Copies the problem's standard starting point into `out[0..len]`.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum HsodmErrorCode hsodm_problem_standard_start(const struct HsodmProblem *problem,
                                                 double *out,
                                                 size_t len);

/**
 * # Safety
 * `problem` must be NULL or a handle not yet freed.
 */
void hsodm_problem_free(struct HsodmProblem *problem);

/**
 * New configuration with tolerance `epsilon`. `inexact != 0` selects the
 * Lanczos (Hessian-vector product) mode.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum HsodmErrorCode hsodm_config_new(double epsilon, int32_t inexact, struct HsodmConfig **out);

/**
 * # Safety
 * `config` must be NULL or a handle not yet freed.
 */
void hsodm_config_free(struct HsodmConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HsodmErrorCode hsodm_config_set_max_iters(struct HsodmConfig *config, size_t max_iters);

/**
 * Stop once `||g|| <= gtol` (with no strong negative curvature). A
 * non-positive value disables the test.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum HsodmErrorCode hsodm_config_set_gtol(struct HsodmConfig *config, double gtol);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HsodmErrorCode hsodm_config_set_seed(struct HsodmConfig *config, uint64_t seed);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HsodmErrorCode hsodm_config_set_fixed_radius(struct HsodmConfig *config);

/**
 * # Safety
 * `config` must be a live handle.
 */
enum HsodmErrorCode hsodm_config_set_backtracking(struct HsodmConfig *config,
                                                  double beta,
                                                  double gamma);

/**
 * `enabled != 0` continues with `delta = 0` unit steps after certification.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum HsodmErrorCode hsodm_config_set_local_phase(struct HsodmConfig *config, int32_t enabled);

/**
 * Overrides `delta`, the radius and `nu`. Pass a negative value (or NaN)
 * to keep the default of a parameter.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum HsodmErrorCode hsodm_config_set_parameters(struct HsodmConfig *config,
                                                double delta,
                                                double radius,
                                                double nu);

/**
 * Runs HSODM from `x0[0..n]`.
 *
 * # Safety
 * Handles must be live, `x0` must hold `n` doubles and `out` must be valid.
 */
enum HsodmErrorCode hsodm_solve(const struct HsodmProblem *problem,
                                const double *x0,
                                size_t n,
                                const struct HsodmConfig *config,
                                struct HsodmResult **out);

/**
 * Runs a baseline solver from `x0[0..n]` until `||g|| <= gtol` or
 * `max_iters` iterations.
 *
 * # Safety
 * `problem` must be live, `x0` must hold `n` doubles and `out` must be valid.
 */
enum HsodmErrorCode hsodm_baseline_solve(const struct HsodmProblem *problem,
                                         enum HsodmBaseline kind,
                                         const double *x0,
                                         size_t n,
                                         double gtol,
                                         size_t max_iters,
                                         struct HsodmResult **out);

/**
 * # Safety
 * `result` must be a live handle.
 */
enum HsodmStatus hsodm_result_status(const struct HsodmResult *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
size_t hsodm_result_iterations(const struct HsodmResult *result);

/**
 * Final objective value (NaN for NULL).
 *
 * # Safety
 * `result` must be a live handle.
 */
double hsodm_result_f(const struct HsodmResult *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
double hsodm_result_grad_norm(const struct HsodmResult *result);

/**
 * # Safety
 * `result` must be a live handle.
 */
size_t hsodm_result_dim(const struct HsodmResult *result);

/**
 * Copies the final iterate into `out[0..len]`.
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum HsodmErrorCode hsodm_result_x(const struct HsodmResult *result, double *out, size_t len);

/**
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum HsodmErrorCode hsodm_result_counters(const struct HsodmResult *result,
                                          struct HsodmCounters *out);

/**
 * Serializes the full result (trace included) as JSON into a new string
 * released with [`hsodm_string_free`].
 *
 * # Safety
 * `result` must be a live handle and `out` a valid pointer.
 */
enum HsodmErrorCode hsodm_result_to_json(const struct HsodmResult *result, char **out);

/**
 * # Safety
 * `result` must be NULL or a handle not yet freed.
 */
void hsodm_result_free(struct HsodmResult *result);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void hsodm_string_free(char *s);

/**
 * `exp(mean(ln(v + shift))) - shift` over `values[0..len]`.
 *
 * # Safety
 * `values` must hold `len` doubles and `out` must be valid.
 */
enum HsodmErrorCode hsodm_scaled_geometric_mean(const double *values,
                                                size_t len,
                                                double shift,
                                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSODM_H */
