#ifndef PHONON_LAB_H
#define PHONON_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Drift conventions accepted by `pl_model_set_convention`.
 */
#define PL_CONVENTION_QUADRATURE 0

#define PL_CONVENTION_MEAN_FIELD 1

/**
 * Status codes returned by every fallible call.
 */
typedef enum PlStatus {
  PL_STATUS_OK = 0,
  PL_STATUS_NULL_POINTER = 1,
  PL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Integration, root finding or eigenvalue failure.
   */
  PL_STATUS_NUMERICAL = 3,
  /**
   * No stable fixed point, so no stationary covariance.
   */
  PL_STATUS_NOT_HURWITZ = 4,
  PL_STATUS_NO_BRACKET = 5,
  PL_STATUS_NON_PHYSICAL = 6,
  PL_STATUS_LINEARIZATION_BREAKDOWN = 7,
  PL_STATUS_BUFFER_TOO_SMALL = 8,
  PL_STATUS_PANIC = 9,
} PlStatus;

/**
 * Opaque model handle.
 */
typedef struct PlModel PlModel;

typedef struct PlParams {
  double j;
  double omega_m;
  double g;
  double gamma_m;
  double delta;
  double lambda;
  double nbar;
} PlParams;

/**
 * Mean-field state `(x1, y1, x2, y2, q, p)`.
 */
typedef struct PlState {
  double x1;
  double y1;
  double x2;
  double y2;
  double q;
  double p;
} PlState;

typedef struct PlFixedPoint {
  struct PlState state;
  double residual;
  double max_re;
  /**
   * 1 when every drift eigenvalue has negative real part.
   */
  int32_t stable;
} PlFixedPoint;

/**
 * `kind`: 1 = fixed point, 2 = limit cycle. Period and extrema are 0 for
 * fixed points.
 */
typedef struct PlAttractor {
  int32_t kind;
  double q0;
  double amplitude;
  double period;
  uint32_t extrema_per_period;
  struct PlState terminal;
} PlAttractor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the engine; static storage.
 */
const char *pl_version(void);

/**
 * Message of the last failed call on this thread, or "" after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *pl_last_error_message(void);

/**
 * Reference rates (J = 10, omega_m = 20, g = 0.02, gamma_m = 0.01, nbar = 0).
 */
struct PlParams pl_params_reference(double delta, double lambda);

/**
 * Creates a model; free it with `pl_model_free`.
 *
 * # Safety
 * `params` must point to a valid `PlParams`; `out` to writable storage.
 */
enum PlStatus pl_model_new(const struct PlParams *params, struct PlModel **out);

/**
 * # Safety
 * `model` must come from `pl_model_new` and not be used afterwards.
 * Null is ignored.
 */
void pl_model_free(struct PlModel *model);

/**
 * Replaces the parameters; the model is unchanged on error.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PlStatus pl_model_set_params(struct PlModel *model, const struct PlParams *params);

/**
 * # Safety
 * Pointers must be valid.
 */
enum PlStatus pl_model_get_params(const struct PlModel *model, struct PlParams *out);

/**
 * `PL_CONVENTION_QUADRATURE` (default) or `PL_CONVENTION_MEAN_FIELD`.
 *
 * # Safety
 * `model` must be valid.
 */
enum PlStatus pl_model_set_convention(struct PlModel *model, int32_t convention);

/**
 * Writes up to `capacity` fixed points (ascending `q`) and their total
 * number to `count`. Returns `BufferTooSmall` if `capacity < count`;
 * the first `capacity` entries are still written.
 *
 * # Safety
 * `out` must hold `capacity` elements (may be null when `capacity` is 0).
 */
enum PlStatus pl_fixed_points(const struct PlModel *model,
                              struct PlFixedPoint *out,
                              size_t capacity,
                              size_t *count);

/**
 * Drift-matrix eigenvalues at `state`, real part descending.
 *
 * # Safety
 * `re` and `im` must each hold 6 doubles.
 */
enum PlStatus pl_stability_eigenvalues(const struct PlModel *model,
                                       const struct PlState *state,
                                       double *re,
                                       double *im);

/**
 * Radiation-pressure damping rate at a fixed point.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PlStatus pl_gamma_opt(const struct PlModel *model, const struct PlState *state, double *out);

/**
 * Threshold drive at detuning `delta` from `gamma_m + gamma_opt = 0`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PlStatus pl_threshold_gamma(const struct PlModel *model, double delta, double *out);

/**
 * Threshold drive at detuning `delta` where the fixed point loses stability.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PlStatus pl_threshold_eigen(const struct PlModel *model, double delta, double *out);

/**
 * Stationary 6x6 covariance (row-major) at the stable fixed point.
 *
 * # Safety
 * `out` must hold 36 doubles.
 */
enum PlStatus pl_steady_covariance(const struct PlModel *model, double *out);

/**
 * Stationary log negativity and mechanical fluctuation radius.
 *
 * # Safety
 * Pointers must be valid; `radius` may be null.
 */
enum PlStatus pl_steady_entanglement(const struct PlModel *model, double *log_neg, double *radius);

/**
 * Log negativity of a two-mode covariance `W` (4x4, row-major).
 *
 * # Safety
 * `w` must hold 16 doubles.
 */
enum PlStatus pl_log_negativity(const double *w, double *out);

/**
 * Integrates from a seeded random state and classifies the attractor.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PlStatus pl_simulate_attractor(const struct PlModel *model,
                                    uint64_t seed,
                                    struct PlAttractor *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHONON_LAB_H */
