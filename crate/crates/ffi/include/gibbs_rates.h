#ifndef GIBBS_RATES_H
#define GIBBS_RATES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a library call.
 */
typedef enum GrStatus {
  GR_STATUS_OK = 0,
  /**
   * A precondition on the arguments was violated.
   */
  GR_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A required pointer argument was null.
   */
  GR_STATUS_NULL_POINTER = 2,
  /**
   * Non-convergence, insufficient truncation, or no solution.
   */
  GR_STATUS_NUMERICAL = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  GR_STATUS_PANIC = 4,
} GrStatus;

/**
 * Beta/binomial x-chain on `0..=n`.
 */
typedef struct GrBetaBinomial GrBetaBinomial;

/**
 * Truncated Poisson/gamma x-chain on `0..=x_max`.
 */
typedef struct GrPoissonGamma GrPoissonGamma;

/**
 * A step count as two 64-bit halves: `value = hi * 2^64 + lo`.
 */
typedef struct GrStepCount {
  uint64_t lo;
  uint64_t hi;
} GrStepCount;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread (empty after success).
 * The pointer stays valid until the next library call on the same thread.
 */
const char *gr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gr_version(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must be null or a pointer obtained from this library, freed once.
 */
void gr_string_free(char *s);

/**
 * Builds the beta/binomial x-chain with a Beta(a, b) prior.
 *
 * # Safety
 * `out_handle` must be valid for writes.
 */
enum GrStatus gr_beta_binomial_new(uint64_t n,
                                   double a,
                                   double b,
                                   struct GrBetaBinomial **out_handle);

/**
 * # Safety
 * `h` must be null or a handle from [`gr_beta_binomial_new`], freed once.
 */
void gr_beta_binomial_free(struct GrBetaBinomial *h);

/**
 * TV distance after `steps` steps from `start`.
 *
 * # Safety
 * `h` must be a live handle and `out_tv` valid for writes.
 */
enum GrStatus gr_beta_binomial_tv(const struct GrBetaBinomial *h,
                                  uint64_t start,
                                  uint64_t steps,
                                  double *out_tv);

/**
 * Smallest step count with TV at most `target` from every start.
 *
 * # Safety
 * `h` must be a live handle and `out_steps` valid for writes.
 */
enum GrStatus gr_beta_binomial_worst_min_steps(const struct GrBetaBinomial *h,
                                               double target,
                                               uint64_t *out_steps);

/**
 * Second-largest eigenvalue of the x-chain.
 *
 * # Safety
 * `h` must be a live handle and `out_value` valid for writes.
 */
enum GrStatus gr_beta_binomial_second_eigenvalue(const struct GrBetaBinomial *h, double *out_value);

/**
 * Builds the Poisson/gamma x-chain truncated at `x_max`.
 *
 * # Safety
 * `out_handle` must be valid for writes.
 */
enum GrStatus gr_poisson_gamma_new(double shape,
                                   double rate,
                                   uint64_t x_max,
                                   struct GrPoissonGamma **out_handle);

/**
 * # Safety
 * `h` must be null or a handle from [`gr_poisson_gamma_new`], freed once.
 */
void gr_poisson_gamma_free(struct GrPoissonGamma *h);

/**
 * Smallest step count with TV at most `target` from `start`.
 *
 * # Safety
 * `h` must be a live handle and `out_steps` valid for writes.
 */
enum GrStatus gr_poisson_gamma_min_steps(const struct GrPoissonGamma *h,
                                         uint64_t start,
                                         double target,
                                         uint64_t *out_steps);

/**
 * Smallest `l` with `sum_i c_i rho_i^(l + offset_i) <= target`.
 *
 * # Safety
 * The three arrays must hold `len` readable elements; `out_steps` must be
 * valid for writes.
 */
enum GrStatus gr_min_steps_geometric(const double *coefficients,
                                     const double *ratios,
                                     const double *offsets,
                                     size_t len,
                                     double target,
                                     struct GrStepCount *out_steps);

/**
 * Drift/minorization minimal step count; `epsilon = 2^epsilon_log2`.
 * `out_log10` may be null.
 *
 * # Safety
 * `out_steps` must be valid for writes; `out_log10` null or valid.
 */
enum GrStatus gr_rosenthal_min_steps(double lambda,
                                     double b,
                                     double epsilon_log2,
                                     double v_x0,
                                     double d,
                                     double r,
                                     double target,
                                     struct GrStepCount *out_steps,
                                     double *out_log10);

/**
 * Smallest `l` with `a^l + weight * b^l <= target`.
 *
 * # Safety
 * `out_steps` must be valid for writes.
 */
enum GrStatus gr_two_term_min_steps(double a,
                                    double b,
                                    double weight,
                                    double target,
                                    struct GrStepCount *out_steps);

/**
 * Random-scan spectral gap at scan weight `alpha` for product `mu * eta`.
 *
 * # Safety
 * `out_gap` must be valid for writes.
 */
enum GrStatus gr_spectral_gap(double alpha, double product, double *out_gap);

/**
 * Roots of the coupling equation. Writes 2 roots, or 1 when `mu = 0`
 * (then `out_minus` is left untouched).
 *
 * # Safety
 * All out pointers must be valid for writes.
 */
enum GrStatus gr_coupling_u(double alpha,
                            double mu,
                            double eta,
                            double *out_plus,
                            double *out_minus,
                            uint32_t *out_count);

/**
 * Systematic-versus-random comparison report as JSON (d, r drive the
 * drift/minorization column). Free the string with [`gr_string_free`].
 *
 * # Safety
 * `out_json` must be valid for writes.
 */
enum GrStatus gr_compare_report_json(uint64_t n,
                                     uint64_t max_steps,
                                     double target,
                                     double d,
                                     double r,
                                     char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GIBBS_RATES_H */
