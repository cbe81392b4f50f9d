#ifndef SESQUI_H
#define SESQUI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SesquiStatus {
  SESQUI_STATUS_OK = 0,
  SESQUI_STATUS_NULL_POINTER = 1,
  SESQUI_STATUS_INVALID_UTF8 = 2,
  SESQUI_STATUS_CONFIG = 3,
  SESQUI_STATUS_NUMERIC = 4,
  SESQUI_STATUS_PANIC = 5,
} SesquiStatus;

/**
 * Opaque process handle.
 */
typedef struct SesquiSpec SesquiSpec;

typedef struct SesquiAsymptotic {
  double x0;
  double xhat;
  double xi;
  double theta;
} SesquiAsymptotic;

typedef struct SesquiSurvival {
  double rho_single;
  double rho_process;
  double residual;
} SesquiSurvival;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or null.
 *
 * The pointer stays valid until the next failing call on this thread.
 */
const char *sesqui_last_error(void);

/**
 * Builds a process from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SesquiStatus sesqui_spec_from_json(const char *json, struct SesquiSpec **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `spec` must come from [`sesqui_spec_from_json`] and not be freed twice.
 */
void sesqui_spec_free(struct SesquiSpec *spec);

/**
 * Writes `P(N = n)` for `n = 0..len` into `out`.
 *
 * # Safety
 * `spec` must be a live handle and `out` must hold `len` doubles.
 */
enum SesquiStatus sesqui_total_prob_table(const struct SesquiSpec *spec,
                                          double *out,
                                          uintptr_t len);

/**
 * Same as [`sesqui_total_prob_table`] via the single-variable fixed point.
 *
 * # Safety
 * `spec` must be a live handle and `out` must hold `len` doubles.
 */
enum SesquiStatus sesqui_oracle_total_prob(const struct SesquiSpec *spec,
                                           double *out,
                                           uintptr_t len);

/**
 * Exponential rate and prefactor of the total-size tail.
 *
 * # Safety
 * `spec` must be a live handle and `out` a valid pointer.
 */
enum SesquiStatus sesqui_asymptotic_params(const struct SesquiSpec *spec,
                                           struct SesquiAsymptotic *out);

/**
 * Natural log of `θ n^{-3/2} e^{-nξ}` for the given parameters.
 */
double sesqui_asymp_log_total_prob(struct SesquiAsymptotic params, uintptr_t n);

/**
 * Survival probabilities of the process.
 *
 * # Safety
 * `spec` must be a live handle and `out` a valid pointer.
 */
enum SesquiStatus sesqui_survival(const struct SesquiSpec *spec, struct SesquiSurvival *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SESQUI_H */
