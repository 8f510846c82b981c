/* Minimizes a shifted quadratic given by callbacks, then Rosenbrock from the
 * built-in suite.
 *
 *   cargo build -p hsodm-ffi --release
 *   cc -I crates/ffi/include crates/ffi/examples/solve.c \
 *      target/release/libhsodm_ffi.a -lm -lpthread -ldl -o solve
 */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "hsodm.h"

static const double center[3] = {1.0, -2.0, 3.0};

static double value(const double *x, size_t n, void *user) {
    (void)user;
    double f = 0.0;
    for (size_t i = 0; i < n; i++) {
        double d = x[i] - center[i];
        f += 0.5 * d * d;
    }
    return f;
}

static void gradient(const double *x, size_t n, double *out, void *user) {
    (void)user;
    for (size_t i = 0; i < n; i++) {
        out[i] = x[i] - center[i];
    }
}

static void hessian(const double *x, size_t n, double *out, void *user) {
    (void)x;
    (void)user;
    for (size_t i = 0; i < n * n; i++) {
        out[i] = (i % (n + 1) == 0) ? 1.0 : 0.0;
    }
}

static int check(HsodmErrorCode code) {
    if (code != HSODM_ERROR_CODE_OK) {
        const char *msg = hsodm_last_error_message();
        fprintf(stderr, "error %d: %s\n", (int)code, msg ? msg : "(none)");
        exit(1);
    }
    return 0;
}

int main(void) {
    HsodmProblem *problem = NULL;
    HsodmConfig *config = NULL;
    HsodmResult *result = NULL;
    double x[3] = {0.0, 0.0, 0.0};

    check(hsodm_problem_from_callbacks(3, value, gradient, hessian, NULL, NULL, &problem));
    check(hsodm_config_new(1e-6, 0, &config));
    check(hsodm_config_set_gtol(config, 1e-8));
    check(hsodm_solve(problem, x, 3, config, &result));
    check(hsodm_result_x(result, x, 3));
    printf("quadratic: status %d, x = (%.6f, %.6f, %.6f)\n", (int)hsodm_result_status(result), x[0], x[1],
           x[2]);
    hsodm_result_free(result);
    hsodm_problem_free(problem);

    double start[2];
    check(hsodm_problem_from_name("rosenbrock", 2, &problem));
    check(hsodm_problem_standard_start(problem, start, 2));
    check(hsodm_config_set_local_phase(config, 1));
    check(hsodm_solve(problem, start, 2, config, &result));

    HsodmCounters counters;
    check(hsodm_result_counters(result, &counters));
    printf("rosenbrock: %zu iterations, f = %.3e, %llu gradient evaluations\n", hsodm_result_iterations(result),
           hsodm_result_f(result), (unsigned long long)counters.n_g);

    char *json = NULL;
    check(hsodm_result_to_json(result, &json));
    printf("json report: %zu bytes\n", strlen(json));
    hsodm_string_free(json);

    hsodm_result_free(result);
    hsodm_config_free(config);
    hsodm_problem_free(problem);
    return 0;
}
