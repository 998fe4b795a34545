#ifndef SQZMEM_H
#define SQZMEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. The error categories mirror the command line exit codes.
 */
typedef enum {
  SQZ_STATUS_OK = 0,
  /**
   * Invalid argument, I/O or other failure.
   */
  SQZ_STATUS_ERR_OTHER = 1,
  /**
   * Scenario or schema error.
   */
  SQZ_STATUS_ERR_SCHEMA = 2,
  /**
   * Numerical solver failure.
   */
  SQZ_STATUS_ERR_SOLVER = 3,
  /**
   * Estimation failure (empty data, rank deficiency, truncation).
   */
  SQZ_STATUS_ERR_ESTIMATION = 4,
  /**
   * Output directory locked by another run.
   */
  SQZ_STATUS_ERR_LOCKED = 5,
  /**
   * A required pointer argument was null.
   */
  SQZ_STATUS_ERR_NULL_POINTER = 6,
  /**
   * A string argument was not valid UTF-8.
   */
  SQZ_STATUS_ERR_UTF8 = 7,
  /**
   * Internal panic caught at the boundary.
   */
  SQZ_STATUS_ERR_PANIC = 8,
} SqzStatus;

/**
 * Opaque noisy loss channel `V -> eta V + 1 - eta + delta`.
 */
typedef struct SqzChannel SqzChannel;

/**
 * Opaque truncated Fock-basis density matrix.
 */
typedef struct SqzDensityMatrix SqzDensityMatrix;

/**
 * Opaque single-mode Gaussian state.
 */
typedef struct SqzGaussianState SqzGaussianState;

/**
 * Gaussian envelope on `[0, duration]`, sampled on the memory time grid.
 */
typedef struct {
  double center;
  double fwhm;
  /**
   * Peak amplitude; ignored for the signal mode, which is normalized.
   */
  double peak;
} SqzPulseShape;

/**
 * Raman memory configuration in normalized units.
 */
typedef struct {
  double g_s;
  double g_a;
  double delta_k;
  double length;
  size_t n_z;
  size_t n_t;
  /**
   * Nonzero selects backward retrieval.
   */
  int32_t backward;
  double duration;
  SqzPulseShape write;
  SqzPulseShape read;
  SqzPulseShape signal;
} SqzMemoryConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sqz_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sqz_version(void);

/**
 * State with principal variances `v_min <= v_max` (SNU), the squeezed axis
 * at `angle` radians.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
SqzStatus sqz_state_new(double v_min, double v_max, double angle, SqzGaussianState **out);

/**
 * State with the given squeezing and anti-squeezing in dB below and above
 * shot noise.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
SqzStatus sqz_state_squeezed(double squeeze_db,
                             double antisqueeze_db,
                             double angle,
                             SqzGaussianState **out);

/**
 * # Safety
 * `state` must be null or a handle from this library not yet freed.
 */
void sqz_state_free(SqzGaussianState *state);

/**
 * Principal variances and squeezing angle.
 *
 * # Safety
 * `state` must be a live handle; the out pointers must be writable.
 */
SqzStatus sqz_state_variances(const SqzGaussianState *state,
                              double *v_min,
                              double *v_max,
                              double *angle);

/**
 * Quadrature variance at local-oscillator phase `theta`.
 *
 * # Safety
 * `state` must be a live handle; `out` must be writable.
 */
SqzStatus sqz_state_quadrature_variance(const SqzGaussianState *state, double theta, double *out);

/**
 * Squeezing and anti-squeezing in dB relative to shot noise.
 *
 * # Safety
 * `state` must be a live handle; the out pointers must be writable.
 */
SqzStatus sqz_state_db(const SqzGaussianState *state, double *squeeze_db, double *antisqueeze_db);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
SqzStatus sqz_channel_new(double eta, double delta, SqzChannel **out);

/**
 * # Safety
 * `channel` must be null or a handle from this library not yet freed.
 */
void sqz_channel_free(SqzChannel *channel);

/**
 * # Safety
 * `channel` must be a live handle; the out pointers must be writable.
 */
SqzStatus sqz_channel_params(const SqzChannel *channel, double *eta, double *delta);

/**
 * Output state of `channel` for input `state`, as a new handle.
 *
 * # Safety
 * `state` and `channel` must be live handles; `out` must be writable.
 */
SqzStatus sqz_channel_apply(const SqzChannel *channel,
                            const SqzGaussianState *state,
                            SqzGaussianState **out);

/**
 * Closed-form fidelity between two zero-mean Gaussian states.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
SqzStatus sqz_gaussian_fidelity(const SqzGaussianState *a, const SqzGaussianState *b, double *out);

/**
 * Phase-averaged excess noise from input and output variance curves sampled
 * at the same `n` phases.
 *
 * # Safety
 * The four arrays must hold `n` values each; `out` must be writable.
 */
SqzStatus sqz_estimate_excess_noise(const double *theta,
                                    const double *v_in,
                                    const double *v_out,
                                    size_t n,
                                    double eta,
                                    double v_vac,
                                    double *out);

/**
 * Fock-basis density matrix of `state`, optionally sent through `channel`
 * (may be null), truncated at photon number `cutoff - 1`.
 *
 * # Safety
 * `state` must be a live handle, `channel` null or live; `out` writable.
 */
SqzStatus sqz_gaussian_to_fock(const SqzGaussianState *state,
                               const SqzChannel *channel,
                               size_t cutoff,
                               SqzDensityMatrix **out);

/**
 * Maximum-likelihood reconstruction from `n` homodyne samples `x[i]` (SNU)
 * at phases `theta[i]`. `iterations` bounds the iterative updates.
 *
 * # Safety
 * `x` and `theta` must hold `n` values; `out` and `converged` (may be null)
 * must be writable.
 */
SqzStatus sqz_mle_reconstruct(const double *x,
                              const double *theta,
                              size_t n,
                              size_t cutoff,
                              size_t iterations,
                              int32_t *converged,
                              SqzDensityMatrix **out);

/**
 * # Safety
 * `rho` must be null or a handle from this library not yet freed.
 */
void sqz_density_free(SqzDensityMatrix *rho);

/**
 * Dimension of the truncated Fock space.
 *
 * # Safety
 * `rho` must be a live handle; `out` writable.
 */
SqzStatus sqz_density_cutoff(const SqzDensityMatrix *rho, size_t *out);

/**
 * Matrix element `<m|rho|n>`.
 *
 * # Safety
 * `rho` must be a live handle; `re` and `im` writable.
 */
SqzStatus sqz_density_element(const SqzDensityMatrix *rho,
                              size_t m,
                              size_t n,
                              double *re,
                              double *im);

/**
 * Uhlmann fidelity between two density matrices of equal cutoff.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` writable.
 */
SqzStatus sqz_uhlmann_fidelity(const SqzDensityMatrix *a, const SqzDensityMatrix *b, double *out);

/**
 * Wigner function at `n` phase-space points `(x[i], p[i])` in the
 * vacuum-1/2 convention, written to `values`.
 *
 * # Safety
 * `x`, `p` and `values` must hold `n` values; `rho` must be a live handle.
 */
SqzStatus sqz_density_wigner(const SqzDensityMatrix *rho,
                             const double *x,
                             const double *p,
                             size_t n,
                             double *values);

/**
 * Effective channel of the memory for the retrieved mode: solves the write
 * and read dynamics and reports transmission `eta` and excess noise `delta`.
 *
 * # Safety
 * `config` must point to a valid configuration; `eta` and `delta` writable.
 */
SqzStatus sqz_memory_channel(const SqzMemoryConfig *config, double *eta, double *delta);

/**
 * Runs one scenario command (for example `"full-pipeline"`) and commits the
 * artifacts to `out_dir`.
 *
 * # Safety
 * `scenario_path`, `command` and `out_dir` must be NUL-terminated strings.
 */
SqzStatus sqz_run_scenario(const char *scenario_path, const char *command, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SQZMEM_H */
