#ifndef PLRNN_CT_H
#define PLRNN_CT_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum PlrnnStatus {
  PLRNN_STATUS_OK = 0,
  /**
   * Some regions failed to convert; the handle is still usable.
   */
  PLRNN_STATUS_PARTIAL = 1,
  PLRNN_STATUS_NULL_POINTER = 2,
  PLRNN_STATUS_INVALID_ARGUMENT = 3,
  PLRNN_STATUS_PARSE = 4,
  PLRNN_STATUS_NOT_CONVERTIBLE = 5,
  PLRNN_STATUS_NUMERICAL = 6,
  PLRNN_STATUS_SIMULATION = 7,
  PLRNN_STATUS_BUFFER_TOO_SMALL = 8,
  PLRNN_STATUS_PANIC = 9,
} PlrnnStatus;

/**
 * Continuous simulation mode.
 */
typedef enum PlrnnMode {
  PLRNN_MODE_STEP_ANCHORED = 0,
  PLRNN_MODE_EVENT_DRIVEN = 1,
} PlrnnMode;

/**
 * Verdict on the existence of a real matrix logarithm.
 */
typedef enum PlrnnRealLog {
  PLRNN_REAL_LOG_YES = 0,
  PLRNN_REAL_LOG_NO = 1,
  PLRNN_REAL_LOG_SINGULAR = 2,
} PlrnnRealLog;

/**
 * Opaque converted (continuous-time) model.
 */
typedef struct PlrnnConvertedHandle PlrnnConvertedHandle;

/**
 * Opaque discrete model.
 */
typedef struct PlrnnModelHandle PlrnnModelHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *plrnn_last_error(void);

/**
 * Library version as a static string.
 */
const char *plrnn_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void plrnn_string_free(char *s);

/**
 * Parses a model from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PlrnnStatus plrnn_model_from_json(const char *json, struct PlrnnModelHandle **out);

/**
 * Builds a model from arrays. `w` is `dim x dim` row-major; `c` is
 * `dim x input_dim` row-major and may be null when `input_dim` is 0.
 *
 * # Safety
 * Every non-null pointer must reference an array of the stated length.
 */
enum PlrnnStatus plrnn_model_new(size_t dim,
                                 const double *a_diag,
                                 const double *w,
                                 const double *h,
                                 double dt,
                                 size_t input_dim,
                                 const double *c,
                                 struct PlrnnModelHandle **out);

/**
 * # Safety
 * `model` must be null or a handle from this library, not yet freed.
 */
void plrnn_model_free(struct PlrnnModelHandle *model);

/**
 * Latent dimension of the model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t plrnn_model_dim(const struct PlrnnModelHandle *model);

/**
 * Serializes the model; release the result with [`plrnn_string_free`].
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PlrnnStatus plrnn_model_to_json(const struct PlrnnModelHandle *model, char **out);

/**
 * Converts every region. Returns `PLRNN_STATUS_PARTIAL` with a usable handle
 * when some regions fail; see [`plrnn_converted_failed_count`].
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PlrnnStatus plrnn_convert(const struct PlrnnModelHandle *model,
                               struct PlrnnConvertedHandle **out);

/**
 * Parses a converted model written by [`plrnn_converted_to_json`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PlrnnStatus plrnn_converted_from_json(const char *json, struct PlrnnConvertedHandle **out);

/**
 * Serializes the converted model, optionally with the per-region report.
 *
 * # Safety
 * `conv` must be a live handle and `out` a valid pointer.
 */
enum PlrnnStatus plrnn_converted_to_json(const struct PlrnnConvertedHandle *conv,
                                         bool include_report,
                                         char **out);

/**
 * Number of regions that failed to convert, or 0 for a null handle.
 *
 * # Safety
 * `conv` must be null or a live handle.
 */
size_t plrnn_converted_failed_count(const struct PlrnnConvertedHandle *conv);

/**
 * # Safety
 * `conv` must be null or a handle from this library, not yet freed.
 */
void plrnn_converted_free(struct PlrnnConvertedHandle *conv);

/**
 * Iterates the map `steps` times from `z0` and writes the `steps + 1` states
 * row by row into `out`, which must hold `(steps + 1) * dim` doubles.
 *
 * # Safety
 * `z0` must hold `dim` doubles and `out` `out_len` doubles.
 */
enum PlrnnStatus plrnn_simulate_discrete(const struct PlrnnModelHandle *model,
                                         const double *z0,
                                         size_t dim,
                                         size_t steps,
                                         double *out,
                                         size_t out_len);

/**
 * Runs the continuous flow over `steps * dt` and writes the states at the
 * step times, laid out as in [`plrnn_simulate_discrete`].
 *
 * # Safety
 * `z0` must hold `dim` doubles and `out` `out_len` doubles.
 */
enum PlrnnStatus plrnn_simulate_continuous(const struct PlrnnModelHandle *model,
                                           const struct PlrnnConvertedHandle *conv,
                                           const double *z0,
                                           size_t dim,
                                           size_t steps,
                                           enum PlrnnMode mode,
                                           double *out,
                                           size_t out_len);

/**
 * Largest max-norm gap between the discrete and step-anchored continuous
 * trajectories over `steps` steps from `z0`.
 *
 * # Safety
 * `z0` must hold `dim` doubles and `max_residual` be a valid pointer.
 */
enum PlrnnStatus plrnn_compare(const struct PlrnnModelHandle *model,
                               const struct PlrnnConvertedHandle *conv,
                               const double *z0,
                               size_t dim,
                               size_t steps,
                               double *max_residual);

/**
 * Decides whether the `n x n` row-major matrix `a` has a real logarithm.
 *
 * # Safety
 * `a` must hold `n * n` doubles and `verdict` be a valid pointer.
 */
enum PlrnnStatus plrnn_real_log_exists(const double *a, size_t n, enum PlrnnRealLog *verdict);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLRNN_CT_H */
