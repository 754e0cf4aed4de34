#ifndef KOOPMAN_SAFE_H
#define KOOPMAN_SAFE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum KsStatus {
  KS_STATUS_OK = 0,
  // A required pointer was null.
  KS_STATUS_NULL_POINTER = 1,
  // An argument or configuration was rejected.
  KS_STATUS_INVALID_ARGUMENT = 2,
  // An array length did not match the expected dimension.
  KS_STATUS_DIMENSION = 3,
  // A numerical failure (degenerate lifting, blow-up, divergence, solver cap).
  KS_STATUS_NUMERICAL = 4,
  // The QP constraints admit no solution.
  KS_STATUS_INFEASIBLE = 5,
  // Reading or writing a file failed.
  KS_STATUS_IO = 6,
  // A Rust panic was caught at the boundary.
  KS_STATUS_PANIC = 7,
} KsStatus;

// Opaque dictionary of observables.
typedef struct KsBasis KsBasis;

// Opaque fixed-time generator estimator.
typedef struct KsEstimator KsEstimator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on the same thread.
const char *ks_last_error_message(void);

// Library version as a static nul-terminated string.
const char *ks_version(void);

// Frees a string returned by this library. Null is a no-op.
//
// # Safety
// `s` must be null or a string returned by this library and not yet freed.
void ks_string_free(char *s);

// Sinusoid dictionary: optional constant, then `sqrt(2) cos` and `sqrt(2) sin`
// of `n pi x_i` for every selected state `i` and harmonic `n`.
//
// # Safety
// Array arguments follow the crate conventions; `out` must be writable.
enum KsStatus ks_basis_new_sinusoid(size_t state_dim,
                                    const uint32_t *harmonics,
                                    size_t n_harmonics,
                                    const size_t *states,
                                    size_t n_states,
                                    bool include_constant,
                                    struct KsBasis **out);

// Monomials of total degree `1..=degree` in the selected states, plus an optional constant.
//
// # Safety
// Array arguments follow the crate conventions; `out` must be writable.
enum KsStatus ks_basis_new_monomial(size_t state_dim,
                                    const size_t *states,
                                    size_t n_states,
                                    uint32_t degree,
                                    bool include_constant,
                                    struct KsBasis **out);

// Number of observables `N` and state dimension `n`.
//
// # Safety
// `basis` must be a live handle; the outputs must be writable.
enum KsStatus ks_basis_dims(const struct KsBasis *basis, size_t *n_obs, size_t *state_dim);

// Evaluates `psi(x)` (length `N`) and optionally its `N x n` Jacobian.
// Pass a null `jac_out` with `jac_len == 0` to skip the Jacobian.
//
// # Safety
// `basis` must be a live handle; arrays follow the crate conventions.
enum KsStatus ks_basis_lift(const struct KsBasis *basis,
                            const double *x,
                            size_t n_x,
                            double *psi_out,
                            size_t psi_len,
                            double *jac_out,
                            size_t jac_len);

// Releases a basis. Null is a no-op.
//
// # Safety
// `basis` must be null or a live handle not used afterwards.
void ks_basis_free(struct KsBasis *basis);

// Zero-initialised estimator over `n_obs` observables with isotropic gains
// chosen so the settling time equals `settling_time`.
//
// # Safety
// `out` must be writable.
enum KsStatus ks_estimator_new(size_t n_obs,
                               double settling_time,
                               double a,
                               double b,
                               double w,
                               double s,
                               struct KsEstimator **out);

// Replaces the estimate `vec(L)` (column-stacked, length `N^2`) and resets its clock.
//
// # Safety
// `estimator` must be a live handle; arrays follow the crate conventions.
enum KsStatus ks_estimator_set_lambda(struct KsEstimator *estimator,
                                      const double *lambda,
                                      size_t len);

// One adaptation step at state `x` with measured derivative `x_dot`.
// Writes the innovation norm left after the step to `nu_after` when non-null.
//
// # Safety
// Handles must be live; arrays follow the crate conventions.
enum KsStatus ks_estimator_adapt(struct KsEstimator *estimator,
                                 const struct KsBasis *basis,
                                 const double *x,
                                 const double *x_dot,
                                 size_t n_x,
                                 double dt,
                                 double *nu_after);

// Copies the current `vec(L)` estimate into `out` (length `N^2`).
//
// # Safety
// `estimator` must be a live handle; arrays follow the crate conventions.
enum KsStatus ks_estimator_lambda(const struct KsEstimator *estimator, double *out, size_t len);

// Settling time `T` and the adaptation clock `t`.
//
// # Safety
// `estimator` must be a live handle; the outputs must be writable.
enum KsStatus ks_estimator_times(const struct KsEstimator *estimator,
                                 double *settling_time,
                                 double *t);

// Releases an estimator. Null is a no-op.
//
// # Safety
// `estimator` must be null or a live handle not used afterwards.
void ks_estimator_free(struct KsEstimator *estimator);

// Solves `min 0.5 |u - u0|^2` subject to `A u >= b`, with `A` row-major `n_rows x m`.
// `multipliers_out` (length `n_rows`) and `kkt_out` may be null.
// Returns `KS_STATUS_INFEASIBLE` when the rows admit no point.
//
// # Safety
// Arrays follow the crate conventions; `u_out` has length `m`.
enum KsStatus ks_qp_solve(const double *u0,
                          size_t m,
                          const double *a,
                          const double *b,
                          size_t n_rows,
                          double *u_out,
                          double *multipliers_out,
                          double *kkt_out);

// Built-in case-study configuration as JSON. Free with [`ks_string_free`].
//
// # Safety
// `out` must be writable.
enum KsStatus ks_scenario_default_config(char **out);

// Runs one closed-loop scenario and returns its summary as JSON.
// A null `config_json` selects the built-in case study.
// `regime` is one of `nominal`, `naive`, `robust`, `robust-adaptive`.
// Free the summary with [`ks_string_free`].
//
// # Safety
// Strings must be nul-terminated; `summary_json` must be writable.
enum KsStatus ks_run_scenario(const char *config_json,
                              const char *regime,
                              uint64_t seed,
                              bool noise,
                              char **summary_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KOOPMAN_SAFE_H */
