#ifndef HARMONIC_H
#define HARMONIC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Architecture selector for [`hm_model_param_count`].
 */
typedef enum HmModelKind {
  HM_MODEL_KIND_DENSE_MLP = 0,
  HM_MODEL_KIND_LSTM_ONLY = 1,
  HM_MODEL_KIND_LSTM_DENSE = 2,
  HM_MODEL_KIND_GRU_DENSE = 3,
  HM_MODEL_KIND_SEQ2SEQ = 4,
} HmModelKind;

/**
 * Result code of every fallible call.
 */
typedef enum HmStatus {
  HM_STATUS_OK = 0,
  HM_STATUS_NULL_POINTER = 1,
  HM_STATUS_INVALID_ARGUMENT = 2,
  HM_STATUS_DOMAIN = 3,
  HM_STATUS_SHAPE = 4,
  HM_STATUS_NON_FINITE = 5,
  HM_STATUS_PARSE = 6,
  HM_STATUS_CORRUPT = 7,
  HM_STATUS_VERSION = 8,
  HM_STATUS_IO = 9,
  HM_STATUS_CONFIG = 10,
  HM_STATUS_PANIC = 11,
} HmStatus;

/**
 * A trained network loaded from a checkpoint.
 */
typedef struct HmModel HmModel;

/**
 * THD percentages of one filter simulation.
 */
typedef struct HmFilterThd {
  double pre;
  double post;
  double ideal;
} HmFilterThd;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hm_version(void);

/**
 * THD in percent of a fundamental magnitude and `count` harmonic
 * magnitudes at the given orders (each ≥ 2, no repeats).
 *
 * # Safety
 * `orders` and `magnitudes` must point to `count` values; `out_pct` must be
 * writable.
 */
enum HmStatus hm_thd(double fundamental,
                     const uint32_t *orders,
                     const double *magnitudes,
                     size_t count,
                     double *out_pct);

/**
 * `|actual − predicted| / |actual| · 100`; fails with `Domain` when
 * `actual` is zero.
 *
 * # Safety
 * `out_pct` must be writable.
 */
enum HmStatus hm_relative_error(double actual, double predicted, double *out_pct);

/**
 * Magnitudes of orders `1..=max_order` in a window holding a whole number
 * of fundamental cycles. `out_magnitudes[0]` is the fundamental.
 *
 * # Safety
 * `samples` must point to `len` values and `out_magnitudes` to `max_order`
 * writable values.
 */
enum HmStatus hm_extract_harmonics(const double *samples,
                                   size_t len,
                                   double sample_rate,
                                   double fundamental_freq,
                                   uint32_t max_order,
                                   double *out_magnitudes);

/**
 * Trainable parameter count of a full-size architecture.
 *
 * # Safety
 * `out` must be writable.
 */
enum HmStatus hm_model_param_count(enum HmModelKind kind, size_t *out);

/**
 * Loads a checkpoint file into a new handle stored in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum HmStatus hm_model_load(const char *path, struct HmModel **out);

/**
 * Values per input sample: features for flat models, steps × features for
 * sequence models.
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
size_t hm_model_input_len(const struct HmModel *model);

/**
 * Values per output sample.
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
size_t hm_model_output_len(const struct HmModel *model);

/**
 * Runs inference on `batch` samples laid out sample-major, in the scaled
 * units the model was trained on. Writes `batch · output_len` values.
 *
 * # Safety
 * `model` must be a live handle, `input` must hold `batch · input_len`
 * values and `output` must have room for `output_cap` values.
 */
enum HmStatus hm_model_predict(const struct HmModel *model,
                               const double *input,
                               size_t batch,
                               double *output,
                               size_t output_cap);

/**
 * Releases a handle from [`hm_model_load`]. NULL is ignored.
 *
 * # Safety
 * `model` must come from [`hm_model_load`] and not be freed twice.
 */
void hm_model_free(struct HmModel *model);

/**
 * Simulates the hysteresis filter on one load with the default
 * simulation settings and a band of `band_fraction` × fundamental.
 * `actual` and `predicted` hold the 3rd, 5th and 7th magnitudes.
 *
 * # Safety
 * `actual` and `predicted` must each point to 3 values; `out` must be
 * writable.
 */
enum HmStatus hm_filter_simulate(double fundamental,
                                 const double *actual,
                                 const double *predicted,
                                 double band_fraction,
                                 struct HmFilterThd *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HARMONIC_H */
