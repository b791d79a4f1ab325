/* C interface to the betaconst spot-beta constancy test. */

#pragma once

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from betaconst-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible ABI call.
enum BcStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  // Success; out-parameters are populated.
  BC_STATUS_OK = 0,
  // A required pointer argument was NULL.
  BC_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  BC_STATUS_INVALID_UTF8 = 2,
  // A configuration document was syntactically or semantically invalid.
  BC_STATUS_BAD_CONFIG = 3,
  // Data arguments have an invalid shape or non-finite values.
  BC_STATUS_BAD_INPUT = 4,
  // The data admit no meaningful estimate (everything truncated, zero
  // retained variation, or a guarded denominator).
  BC_STATUS_DEGENERATE = 5,
  // An input file or record could not be parsed.
  BC_STATUS_PARSE_FAILED = 6,
  // An operating-system I/O failure.
  BC_STATUS_IO_FAILED = 7,
  // A panic was caught at the boundary; state is unchanged.
  BC_STATUS_PANIC = 8,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum BcStatus BcStatus;
#else
typedef int32_t BcStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

// Simulated pair of log-price series; read with the `bc_path_*` accessors
// and release with `bc_path_free`.
typedef struct BcPath BcPath;

// Flat summary of a test run.
typedef struct BcTestSummary {
  // Self-normalized window statistic; standard normal under a constant
  // beta.
  double statistic;
  // One-sided upper-tail p-value.
  double p_value;
  // The beta the statistic was evaluated at (supplied or pooled).
  double beta_used;
  // Pooled regression coefficient; NaN when the beta was supplied.
  double pooled_beta;
  // 95% confidence bounds for the pooled beta; NaN when supplied.
  double pooled_ci_low;
  double pooled_ci_high;
  // statistic / sqrt(N k): divergence coefficient under a time-varying
  // beta, vanishing under the null.
  double scaled_alternative;
  // Days in the window.
  size_t days;
  // Blocks that entered the statistic.
  size_t contributing_blocks;
  // Blocks skipped by the denominator guard.
  size_t skipped_blocks;
  // False when more than 10% of eligible blocks were guard-skipped.
  bool valid;
} BcTestSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *bc_version(void);

// Message describing the most recent failure on the calling thread, or an
// empty string. Valid until the next failing call on this thread.
const char *bc_last_error_message(void);

// Simulate the two-asset model described by `config_json` (schema of the
// library's `SimConfig`; NULL selects the defaults) and return an owned
// handle through `out_path`.
BcStatus bc_simulate_json(const char *config_json, struct BcPath **out_path);

// Number of grid points in each series (`days * n_per_day + 1`), or 0 for a
// NULL handle.
size_t bc_path_points(const struct BcPath *path);

// Observations per day of the simulated grid, or 0 for a NULL handle.
size_t bc_path_n_per_day(const struct BcPath *path);

// Number of simulated days, or 0 for a NULL handle.
size_t bc_path_days(const struct BcPath *path);

// Borrowed pointer to the X log-price series (`bc_path_points` doubles).
// NULL for a NULL handle. Invalidated by `bc_path_free`.
const double *bc_path_x(const struct BcPath *path);

// Borrowed pointer to the Y log-price series (`bc_path_points` doubles).
// NULL for a NULL handle. Invalidated by `bc_path_free`.
const double *bc_path_y(const struct BcPath *path);

// Release a handle returned by `bc_simulate_json`. NULL is a no-op.
void bc_path_free(struct BcPath *path);

// Run the constant-beta test on caller-owned log-price buffers.
//
// `x` and `y` hold `points = days*n_per_day + 1` doubles each; `config_json`
// follows the library's `TestConfig` schema (NULL selects the defaults:
// k_n = 19, estimated beta, adaptive truncation).
BcStatus bc_run_test(const double *x,
                     const double *y,
                     size_t points,
                     size_t n_per_day,
                     const char *config_json,
                     struct BcTestSummary *out_summary);

// Pooled (window-wide) regression coefficient of Y on X from truncated
// increments. `config_json` follows the `TestConfig` schema; only its
// truncation settings are used. NULL selects the defaults.
BcStatus bc_pooled_beta(const double *x,
                        const double *y,
                        size_t points,
                        size_t n_per_day,
                        const char *config_json,
                        double *out_beta);

// Rate-optimal block size for `n` increments per day under smoothness
// `alpha` (k of order sqrt(n) at alpha = 1); writes at least 2.
BcStatus bc_suggest_block_size(size_t n, double alpha, size_t *out_k);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
