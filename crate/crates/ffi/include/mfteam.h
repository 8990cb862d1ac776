#ifndef MFTEAM_H
#define MFTEAM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MfStatus {
  MF_STATUS_OK = 0,
  MF_STATUS_NULL_POINTER = 1,
  MF_STATUS_INVALID_ARGUMENT = 2,
  MF_STATUS_PARSE_ERROR = 3,
  MF_STATUS_INFEASIBLE = 4,
  MF_STATUS_BUFFER_TOO_SMALL = 5,
  MF_STATUS_OUT_OF_RANGE = 6,
  MF_STATUS_INTERNAL = 7,
  MF_STATUS_PANIC = 8,
} MfStatus;

typedef enum MfGain {
  MF_GAIN_L_BREV = 0,
  MF_GAIN_L_BAR = 1,
  MF_GAIN_K_BREV = 2,
  MF_GAIN_K_BAR = 3,
} MfGain;

typedef enum MfValueMatrix {
  MF_VALUE_MATRIX_M_BREV = 0,
  MF_VALUE_MATRIX_M_BAR = 1,
} MfValueMatrix;

typedef enum MfDisturbance {
  MF_DISTURBANCE_ZERO = 0,
  MF_DISTURBANCE_SINUSOID_FOLLOWERS = 1,
  MF_DISTURBANCE_WORST_CASE = 2,
} MfDisturbance;

/**
 * A loaded model.
 */
typedef struct MfModel MfModel;

/**
 * Riccati solution and, when feasible, gains for one model and γ.
 */
typedef struct MfSynthesis MfSynthesis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t mf_last_error_message(char *buf, size_t len);

/**
 * Parses a TOML model description.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum MfStatus mf_model_from_toml(const char *text, struct MfModel **out);

/**
 * Loads a bundled model, `"example1"` or `"example2"`.
 *
 * # Safety
 * As for [`mf_model_from_toml`].
 */
enum MfStatus mf_model_bundled(const char *name, struct MfModel **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void mf_model_free(struct MfModel *model);

/**
 * # Safety
 * `model` must be a live handle.
 */
enum MfStatus mf_model_set_gamma(struct MfModel *model, double gamma);

/**
 * # Safety
 * `model` must be a live handle.
 */
enum MfStatus mf_model_set_followers(struct MfModel *model, size_t n);

/**
 * Horizon, state and action dimensions, follower count and γ. Any output
 * pointer may be null.
 *
 * # Safety
 * `model` must be a live handle; non-null outputs must be writable.
 */
enum MfStatus mf_model_info(const struct MfModel *model,
                            size_t *horizon,
                            size_t *state_dim,
                            size_t *action_dim,
                            size_t *n_followers,
                            double *gamma);

/**
 * Runs both Riccati recursions. Succeeds for infeasible γ too; query
 * [`mf_synthesis_feasible`].
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MfStatus mf_synthesize(const struct MfModel *model, struct MfSynthesis **out);

/**
 * # Safety
 * `s` must be null or a handle from this library, not yet freed.
 */
void mf_synthesis_free(struct MfSynthesis *s);

/**
 * Feasibility verdict, smallest margin, and the violating step (0 if none).
 *
 * # Safety
 * `s` must be a live handle; non-null outputs must be writable.
 */
enum MfStatus mf_synthesis_feasible(const struct MfSynthesis *s,
                                    bool *feasible,
                                    double *min_margin,
                                    size_t *violation_t);

/**
 * # Safety
 * `s` must be a live handle; `out` must be writable.
 */
enum MfStatus mf_synthesis_optimal_value(const struct MfSynthesis *s, double *out);

/**
 * Copies gain `which` at step `t` (1-based) into `buf`. `rows`/`cols`
 * receive the shape even when the buffer is too small; pass a null buffer
 * with `len = 0` to query the shape.
 *
 * # Safety
 * `s` must be a live handle; `buf` must hold `len` doubles; shape pointers
 * may be null.
 */
enum MfStatus mf_synthesis_gain(const struct MfSynthesis *s,
                                enum MfGain which,
                                size_t t,
                                double *buf,
                                size_t len,
                                size_t *rows,
                                size_t *cols);

/**
 * Copies `M̆_t` or `M̄_t`, `t = 1..=T+1`, into `buf`.
 *
 * # Safety
 * As for [`mf_synthesis_gain`].
 */
enum MfStatus mf_synthesis_value_matrix(const struct MfSynthesis *s,
                                        enum MfValueMatrix which,
                                        size_t t,
                                        double *buf,
                                        size_t len,
                                        size_t *rows,
                                        size_t *cols);

/**
 * Bisects the feasibility boundary between an infeasible `lo` and a
 * feasible `hi`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum MfStatus mf_critical_gamma(const struct MfModel *model,
                                double lo,
                                double hi,
                                double tol,
                                double *out);

/**
 * Monte Carlo mean and standard error of the realized cost under full
 * mean-field sharing. `amplitude` is used by the sinusoidal disturbance only.
 *
 * # Safety
 * `s` must be a live handle; non-null outputs must be writable.
 */
enum MfStatus mf_simulate_cost(const struct MfSynthesis *s,
                               uint64_t seed,
                               size_t runs,
                               enum MfDisturbance disturbance,
                               double amplitude,
                               double *mean,
                               double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFTEAM_H */
