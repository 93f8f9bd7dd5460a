#ifndef LANDAUER_FCS_H
#define LANDAUER_FCS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LfComponent {
  LF_COMPONENT_TOTAL = 0,
  LF_COMPONENT_CLASSICAL = 1,
  LF_COMPONENT_COHERENT = 2,
} LfComponent;

typedef enum LfMode {
  LF_MODE_QUANTUM = 0,
  LF_MODE_CLASSICAL = 1,
} LfMode;

typedef enum LfStatus {
  LF_STATUS_OK = 0,
  LF_STATUS_INVALID_ARGUMENT = 1,
  LF_STATUS_NULL_POINTER = 2,
  LF_STATUS_NUMERICAL = 3,
  LF_STATUS_PANIC = 4,
} LfStatus;

/**
 * Opaque experiment handle. The slow-driving expansion is built once at creation.
 */
typedef struct LfExperiment LfExperiment;

/**
 * Dimensionless parameters; energies in units of the final gap.
 */
typedef struct LfParams {
  double alpha;
  double beta_eps_tau;
  double eps0_ratio;
  double gammabar_tau;
  enum LfMode mode;
} LfParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lf_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the next call into the library.
 */
const char *lf_last_error_message(void);

/**
 * Default parameter set.
 */
struct LfParams lf_params_default(void);

/**
 * Creates an experiment handle in `*out`; release it with `lf_experiment_free`.
 *
 * # Safety
 * `params` must point to a valid `LfParams`; `out` must be writable.
 */
enum LfStatus lf_experiment_new(const struct LfParams *params, struct LfExperiment **out);

/**
 * Releases a handle. Null is a no-op.
 *
 * # Safety
 * `h` must come from `lf_experiment_new` and not have been freed.
 */
void lf_experiment_free(struct LfExperiment *h);

/**
 * Protocol duration in units of the inverse final gap.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_experiment_tau(const struct LfExperiment *h, double *out);

/**
 * Bath temperature in units of the final gap.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_experiment_temperature(const struct LfExperiment *h, double *out);

/**
 * Largest `v/γ` and `γ/ε` along the protocol.
 *
 * # Safety
 * `h` must be a live handle; both out-pointers must be writable.
 */
enum LfStatus lf_validity_ratios(const struct LfExperiment *h, double *speed, double *secular);

/**
 * Slow-driving cumulant generating function at counting field `u`.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_slowdrive_cgf(const struct LfExperiment *h,
                               enum LfComponent component,
                               double u,
                               double *out);

/**
 * First four slow-driving cumulants written to `out[0..4]`.
 *
 * # Safety
 * `h` must be a live handle; `out` must hold four doubles.
 */
enum LfStatus lf_slowdrive_cumulants(const struct LfExperiment *h,
                                     enum LfComponent component,
                                     double *out);

/**
 * Exact CGF from the tilted master equation with entropy-production boundary terms.
 *
 * # Safety
 * `h` must be a live handle; `out` must be writable.
 */
enum LfStatus lf_exact_cgf(const struct LfExperiment *h,
                           double u,
                           double rtol,
                           double atol,
                           double *out);

/**
 * Runs `n` quantum-jump trajectories and writes their excess heat to `out[0..n]`.
 *
 * # Safety
 * `h` must be a live handle; `out` must hold `n` doubles.
 */
enum LfStatus lf_simulate_excess_heat(const struct LfExperiment *h,
                                      size_t n,
                                      uint64_t seed,
                                      double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* LANDAUER_FCS_H */
