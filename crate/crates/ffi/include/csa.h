#ifndef CSA_H
#define CSA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result code of every fallible call.
 */
typedef enum CsaStatus {
  CSA_STATUS_OK = 0,
  CSA_STATUS_NULL_POINTER = 1,
  CSA_STATUS_INVALID_ARGUMENT = 2,
  CSA_STATUS_IO = 3,
  CSA_STATUS_PARSE = 4,
  /**
   * The data are inconsistent with the requested model (for example an
   * insertion count above the model order).
   */
  CSA_STATUS_DATA = 5,
  /**
   * Newton iteration did not converge or the information is singular.
   */
  CSA_STATUS_NON_CONVERGENCE = 6,
  /**
   * The likelihood has no positive finite maximizer.
   */
  CSA_STATUS_NO_POSITIVE_MLE = 7,
  /**
   * The buffer passed in is too small; nothing was written.
   */
  CSA_STATUS_BUFFER_TOO_SMALL = 8,
  CSA_STATUS_PANIC = 9,
} CsaStatus;

/**
 * Maximum-likelihood fit.
 */
typedef struct CsaFit CsaFit;

/**
 * Accepted point sequence.
 */
typedef struct CsaSequence CsaSequence;

/**
 * Replayed sufficient statistics of a sequence.
 */
typedef struct CsaTrajectory CsaTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *csa_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *csa_version(void);

/**
 * Simulates a sequence in a `dim`-dimensional cube of volume `scale`.
 * `beta` holds `beta_1..beta_N` (`n_beta` may be 0 for the hard-core model).
 * `count == 0` runs until jamming.
 *
 * # Safety
 * `beta` must point to `n_beta` doubles and `out` must be writable.
 */
enum CsaStatus csa_simulate(double radius,
                            const double *beta,
                            size_t n_beta,
                            size_t dim,
                            double scale,
                            size_t count,
                            uint64_t seed,
                            struct CsaSequence **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum CsaStatus csa_sequence_read(const char *path, struct CsaSequence **out);

/**
 * # Safety
 * `seq` must be a live handle and `path` a NUL-terminated string.
 */
enum CsaStatus csa_sequence_write(const struct CsaSequence *seq, const char *path);

/**
 * Number of points; 0 for a null handle.
 *
 * # Safety
 * `seq` must be null or a live handle.
 */
size_t csa_sequence_len(const struct CsaSequence *seq);

/**
 * Dimension of the domain; 0 for a null handle.
 *
 * # Safety
 * `seq` must be null or a live handle.
 */
size_t csa_sequence_dim(const struct CsaSequence *seq);

/**
 * Whether the run ended because no admissible area was left.
 *
 * # Safety
 * `seq` must be null or a live handle.
 */
bool csa_sequence_jammed(const struct CsaSequence *seq);

/**
 * Copies the coordinates, point-major, into `buf` of `buf_len` doubles
 * (at least `len * dim`).
 *
 * # Safety
 * `seq` must be a live handle and `buf` must hold `buf_len` doubles.
 */
enum CsaStatus csa_sequence_coords(const struct CsaSequence *seq, double *buf, size_t buf_len);

/**
 * # Safety
 * `seq` must be null or a handle not yet freed.
 */
void csa_sequence_free(struct CsaSequence *seq);

/**
 * Replays `seq` at model order `order` with grid edge `h` (`h <= 0` selects
 * `R/50`).
 *
 * # Safety
 * `seq` must be a live handle and `out` writable.
 */
enum CsaStatus csa_replay(const struct CsaSequence *seq,
                          size_t order,
                          double h,
                          struct CsaTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t csa_trajectory_len(const struct CsaTrajectory *traj);

/**
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t csa_trajectory_order(const struct CsaTrajectory *traj);

/**
 * Copies `t_0..t_N` into `buf` (at least `order + 1` entries).
 *
 * # Safety
 * `traj` must be a live handle and `buf` must hold `buf_len` entries.
 */
enum CsaStatus csa_trajectory_t(const struct CsaTrajectory *traj, uint64_t *buf, size_t buf_len);

/**
 * Log-likelihood at `beta_1..beta_N`; `-inf` is a valid result.
 *
 * # Safety
 * `traj` must be a live handle, `beta` must hold `n_beta` doubles and `out`
 * must be writable.
 */
enum CsaStatus csa_log_likelihood(const struct CsaTrajectory *traj,
                                  const double *beta,
                                  size_t n_beta,
                                  double *out);

/**
 * Fits the weights. On `CSA_STATUS_NO_POSITIVE_MLE` or
 * `CSA_STATUS_NON_CONVERGENCE` the handle is still produced and holds the
 * last iterate.
 *
 * # Safety
 * `traj` must be a live handle and `out` writable.
 */
enum CsaStatus csa_fit(const struct CsaTrajectory *traj, struct CsaFit **out);

/**
 * Copies `beta_hat_1..beta_hat_N` into `buf`.
 *
 * # Safety
 * `fit` must be a live handle and `buf` must hold `buf_len` doubles.
 */
enum CsaStatus csa_fit_beta(const struct CsaFit *fit, double *buf, size_t buf_len);

/**
 * Whether the fit converged to an interior maximizer.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
bool csa_fit_converged(const struct CsaFit *fit);

/**
 * Normal intervals at `level`; `lower` and `upper` must each hold `buf_len`
 * doubles, at least the model order.
 *
 * # Safety
 * `fit` must be a live handle and both buffers must hold `buf_len` doubles.
 */
enum CsaStatus csa_fit_intervals(const struct CsaFit *fit,
                                 double level,
                                 double *lower,
                                 double *upper,
                                 size_t buf_len);

/**
 * # Safety
 * `fit` must be null or a handle not yet freed.
 */
void csa_fit_free(struct CsaFit *fit);

/**
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void csa_trajectory_free(struct CsaTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSA_H */
