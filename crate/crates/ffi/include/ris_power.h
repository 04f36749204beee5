#ifndef RIS_POWER_H
#define RIS_POWER_H

/* Generated by cbindgen from the ris-power-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum RpStatus {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_POINTER = 1,
  RP_STATUS_INVALID_ARGUMENT = 2,
  RP_STATUS_DIMENSION_MISMATCH = 3,
  RP_STATUS_NUMERICAL = 4,
  RP_STATUS_IO = 5,
  RP_STATUS_PANIC = 6,
} RpStatus;

/**
 * Opaque problem instance: channels, symbols, constellation and targets.
 */
typedef struct RpInstance RpInstance;

/**
 * Opaque solver output.
 */
typedef struct RpResult RpResult;

/**
 * Bisection settings. Obtain defaults from `rp_solve_options_default`.
 */
typedef struct RpSolveOptions {
  double p_lower;
  double p_upper;
  double eps_tol;
  uint32_t max_iterations;
  /**
   * How many times the upper bound may be doubled when it is infeasible.
   */
  uint32_t bracket_repairs;
  /**
   * Seed for the random starting point of the initialization.
   */
  uint64_t seed;
} RpSolveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len` bytes). Returns the full message length
 * excluding the terminator, or 0 if the last call succeeded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t rp_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rp_version(void);

struct RpSolveOptions rp_solve_options_default(void);

/**
 * Builds an instance from explicit channels.
 *
 * `h_g_re`/`h_g_im` hold the `n` generator-to-RIS gains; `h_u_re`/`h_u_im`
 * hold the `k x n` RIS-to-user gains row by row. `symbols` holds `k` symbol
 * indices in `0..alpha_s` and `targets` the `k` error-rate targets.
 *
 * # Safety
 * Every pointer must reference arrays of the stated length; `out` must be
 * writable.
 */
enum RpStatus rp_instance_new(size_t n,
                              size_t k,
                              size_t alpha_s,
                              const double *h_g_re,
                              const double *h_g_im,
                              const double *h_u_re,
                              const double *h_u_im,
                              const size_t *symbols,
                              const double *targets,
                              double noise_var,
                              struct RpInstance **out);

/**
 * Builds an instance with i.i.d. unit-variance Rayleigh channels, random
 * symbols and every target equal to `10^-tau`, all drawn from `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum RpStatus rp_instance_new_rayleigh(size_t n,
                                       size_t k,
                                       size_t alpha_s,
                                       double tau,
                                       double noise_var,
                                       uint64_t seed,
                                       struct RpInstance **out);

/**
 * # Safety
 * `inst` must be null or a pointer from an `rp_instance_new*` call that has
 * not been freed.
 */
void rp_instance_free(struct RpInstance *inst);

/**
 * Number of RIS elements.
 *
 * # Safety
 * `inst` must be a live instance or null (returns 0).
 */
size_t rp_instance_elements(const struct RpInstance *inst);

/**
 * Number of users.
 *
 * # Safety
 * `inst` must be a live instance or null (returns 0).
 */
size_t rp_instance_users(const struct RpInstance *inst);

/**
 * Finds the minimum power meeting every target. `options` may be null for
 * the defaults. An instance that stays infeasible still yields a result;
 * check `rp_result_feasible`.
 *
 * # Safety
 * `inst` must be a live instance, `options` null or valid, `out` writable.
 */
enum RpStatus rp_solve(const struct RpInstance *inst,
                       const struct RpSolveOptions *options,
                       struct RpResult **out);

/**
 * # Safety
 * `res` must be null or a pointer from `rp_solve` that has not been freed.
 */
void rp_result_free(struct RpResult *res);

/**
 * Minimum power found (linear scale), or NaN for a null result.
 *
 * # Safety
 * `res` must be a live result or null.
 */
double rp_result_power(const struct RpResult *res);

/**
 * `10 log10(P / noise_var)`, or NaN for a null result.
 *
 * # Safety
 * `res` must be a live result or null.
 */
double rp_result_power_db(const struct RpResult *res);

/**
 * Whether every target was met.
 *
 * # Safety
 * `res` must be a live result or null (returns false).
 */
bool rp_result_feasible(const struct RpResult *res);

/**
 * Bisection steps taken.
 *
 * # Safety
 * `res` must be a live result or null (returns 0).
 */
size_t rp_result_iterations(const struct RpResult *res);

/**
 * Copies the unit-modulus reflection coefficients into `re`/`im`, which
 * must hold exactly as many entries as the instance has elements.
 *
 * # Safety
 * `res` must be a live result; `re` and `im` must point to `len` writable
 * doubles.
 */
enum RpStatus rp_result_phases(const struct RpResult *res, double *re, double *im, size_t len);

/**
 * Union bound `erfc(d1/sigma)/2 + erfc(d2/sigma)/2` on the symbol error
 * probability for boundary distances `d1`, `d2`. NaN if `sigma_w <= 0`.
 */
double rp_union_bound_sep(double d1, double d2, double sigma_w);

/**
 * Transmits the instance's symbols through the solved phases `trials`
 * times with fresh noise and writes each user's empirical error rate to
 * `sep_out`, which must hold one entry per user.
 *
 * # Safety
 * `inst` and `res` must be live and belong together; `sep_out` must point
 * to `len` writable doubles.
 */
enum RpStatus rp_simulate(const struct RpInstance *inst,
                          const struct RpResult *res,
                          uint64_t trials,
                          uint64_t seed,
                          double *sep_out,
                          size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RIS_POWER_H */
