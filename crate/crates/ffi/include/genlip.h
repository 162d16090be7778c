#ifndef GENLIP_H
#define GENLIP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GenlipStatus {
  GENLIP_STATUS_OK = 0,
  GENLIP_STATUS_NULL_POINTER = 1,
  GENLIP_STATUS_INVALID_UTF8 = 2,
  GENLIP_STATUS_INVALID_PARAMETER = 3,
  /**
   * A parameter-regime inequality of a construction fails.
   */
  GENLIP_STATUS_REGIME = 4,
  GENLIP_STATUS_DIVERGED = 5,
  GENLIP_STATUS_CONFIG = 6,
  GENLIP_STATUS_IO = 7,
  GENLIP_STATUS_NUMERIC = 8,
  GENLIP_STATUS_OUT_OF_RANGE = 9,
  GENLIP_STATUS_PANIC = 10,
} GenlipStatus;

/**
 * Opaque problem handle.
 */
typedef struct GenlipProblem GenlipProblem;

/**
 * Opaque handle to a finished run.
 */
typedef struct GenlipRun GenlipRun;

/**
 * Problem constants as declared by the suite.
 */
typedef struct GenlipConstants {
  double radius;
  double m0;
  double m1;
  double g0;
  double g1;
  double f_star;
  /**
   * Largest optimality gap over the feasible ball.
   */
  double max_gap;
} GenlipConstants;

/**
 * One trace row. Quantities that do not apply are NaN.
 */
typedef struct GenlipTraceRow {
  uint64_t k;
  double f_gap;
  double f_gap_avg_iterate;
  double step_norm;
  double effective_stepsize;
  double regret_running;
  uint64_t wall_ns;
} GenlipTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes, not
 * counting the terminator, so a caller can size a second attempt.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t genlip_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *genlip_version(void);

/**
 * Build a suite problem from its id, e.g. `exp_inf{d=2,R=1}` or
 * `lower:sgd_I{R=1,G0=1,G1=8,eps=0.1}`.
 *
 * # Safety
 * `spec` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum GenlipStatus genlip_problem_new(const char *spec, struct GenlipProblem **out);

/**
 * Release a problem. Null is ignored.
 *
 * # Safety
 * `p` must be null or a handle from [`genlip_problem_new`] not yet freed.
 */
void genlip_problem_free(struct GenlipProblem *p);

/**
 * Dimension of the problem, 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live problem handle.
 */
size_t genlip_problem_dim(const struct GenlipProblem *p);

/**
 * # Safety
 * `p` must be a live problem handle and `out` a valid pointer.
 */
enum GenlipStatus genlip_problem_constants(const struct GenlipProblem *p,
                                           struct GenlipConstants *out);

/**
 * `f(x)`.
 *
 * # Safety
 * `p` must be a live handle, `x` must point to `n` doubles and `out` must be
 * valid.
 */
enum GenlipStatus genlip_problem_value(const struct GenlipProblem *p,
                                       const double *x,
                                       size_t n,
                                       double *out);

/**
 * A subgradient at `x`, written to `grad` (length `n`).
 *
 * # Safety
 * `p` must be a live handle; `x` and `grad` must point to `n` doubles.
 */
enum GenlipStatus genlip_problem_subgrad(const struct GenlipProblem *p,
                                         const double *x,
                                         size_t n,
                                         double *grad);

/**
 * Run one method on a problem.
 *
 * `method` is a method id such as `adamw_exp`, `adamw_exp:two_stage`,
 * `framework:solo_scalar:avg` or `quasar:solo_scalar`. `options` is null or
 * `key = value` lines in the experiment config format (`eps`, `noise`, `k`,
 * `eta`, `c_hat`, `trace`, ...); `problem`, `methods` and `seeds` keys are
 * ignored in favour of the arguments.
 *
 * # Safety
 * `p` must be a live handle, `method` a NUL-terminated string, `options`
 * null or NUL-terminated, `out` a valid pointer.
 */
enum GenlipStatus genlip_run(const struct GenlipProblem *p,
                             const char *method,
                             const char *options,
                             uint64_t seed,
                             struct GenlipRun **out);

/**
 * Release a run. Null is ignored.
 *
 * # Safety
 * `r` must be null or a handle from [`genlip_run`] not yet freed.
 */
void genlip_run_free(struct GenlipRun *r);

/**
 * Iterations performed, 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live run handle.
 */
uint64_t genlip_run_steps(const struct GenlipRun *r);

/**
 * Gap at the last iterate, NaN for a null handle.
 *
 * # Safety
 * `r` must be null or a live run handle.
 */
double genlip_run_final_gap(const struct GenlipRun *r);

/**
 * First iteration whose reported gap reached the target, or -1.
 *
 * # Safety
 * `r` must be null or a live run handle.
 */
int64_t genlip_run_first_hit(const struct GenlipRun *r);

/**
 * A derived parameter such as `K`, `T` or `eta`.
 *
 * # Safety
 * `r` must be a live run handle, `name` NUL-terminated, `out` valid.
 */
enum GenlipStatus genlip_run_param(const struct GenlipRun *r, const char *name, double *out);

/**
 * Number of trace rows, 0 for a null handle.
 *
 * # Safety
 * `r` must be null or a live run handle.
 */
size_t genlip_run_row_count(const struct GenlipRun *r);

/**
 * # Safety
 * `r` must be a live run handle and `out` valid.
 */
enum GenlipStatus genlip_run_row(const struct GenlipRun *r, size_t i, struct GenlipTraceRow *out);

/**
 * Copy the final iterate into `x` (length `n`, which must equal the
 * problem dimension).
 *
 * # Safety
 * `r` must be a live run handle and `x` must point to `n` writable doubles.
 */
enum GenlipStatus genlip_run_final_x(const struct GenlipRun *r, double *x, size_t n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GENLIP_H */
