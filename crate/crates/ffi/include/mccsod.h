#ifndef MCCSOD_H
#define MCCSOD_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes.
typedef enum MccsodStatus {
  MCCSOD_STATUS_OK = 0,
  MCCSOD_STATUS_NULL_POINTER = 1,
  MCCSOD_STATUS_INVALID_ARGUMENT = 2,
  // File missing, unreadable or undecodable.
  MCCSOD_STATUS_IO = 3,
  // Unpaired or empty dataset directories.
  MCCSOD_STATUS_DATA = 4,
  // Buffer or tensor sizes do not fit together.
  MCCSOD_STATUS_DIMENSION = 5,
  // Checkpoint or model state unusable.
  MCCSOD_STATUS_STATE = 6,
  MCCSOD_STATUS_NON_FINITE = 7,
  MCCSOD_STATUS_PANIC = 8,
  MCCSOD_STATUS_INTERNAL = 9,
} MccsodStatus;

// Opaque handle to a loaded network.
typedef struct MccsodModel MccsodModel;

// Scores of one image, or dataset averages.
typedef struct MccsodMetrics {
  double s_alpha;
  double f_max;
  double f_mean;
  double f_adp;
  double e_max;
  double e_mean;
  double e_adp;
  double mae;
  uintptr_t n_images;
} MccsodMetrics;

// Saliency loss terms of one map.
typedef struct MccsodLossTerms {
  double bce;
  double iou;
  double fm;
} MccsodLossTerms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mccsod_version(void);

// Message describing the last failure on this thread, or NULL. The pointer
// stays valid until the next call into this library on the same thread.
const char *mccsod_last_error(void);

// Loads a checkpoint written by `mccsod train`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer. On
// success `*out` receives a handle to release with [`mccsod_model_free`].
enum MccsodStatus mccsod_model_load(const char *path, struct MccsodModel **out);

// Releases a model. NULL is ignored.
//
// # Safety
// `model` must come from [`mccsod_model_load`] and not be used afterwards.
void mccsod_model_free(struct MccsodModel *model);

// Square side length the network runs at.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum MccsodStatus mccsod_model_input_size(const struct MccsodModel *model, uintptr_t *out);

// Number of scalar parameters.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum MccsodStatus mccsod_model_parameter_count(const struct MccsodModel *model, uintptr_t *out);

// Saliency map of an interleaved RGB image, written to `out` at the
// image's own resolution.
//
// # Safety
// `rgb` must hold `height * width * 3` floats and `out` room for
// `height * width`.
enum MccsodStatus mccsod_model_predict(const struct MccsodModel *model,
                                       const float *rgb,
                                       uintptr_t height,
                                       uintptr_t width,
                                       float *out);

// All measures of one prediction against a mask (binarized at 0.5).
//
// # Safety
// `pred` and `gt` must each hold `height * width` floats; `out` must be
// valid.
enum MccsodStatus mccsod_evaluate_pair(const float *pred,
                                       const float *gt,
                                       uintptr_t height,
                                       uintptr_t width,
                                       struct MccsodMetrics *out);

// Precision and recall at the 256 thresholds of one prediction.
//
// # Safety
// `pred` and `gt` must each hold `height * width` floats; `precision` and
// `recall` must each have room for 256 doubles.
enum MccsodStatus mccsod_pr_curve(const float *pred,
                                  const float *gt,
                                  uintptr_t height,
                                  uintptr_t width,
                                  double *precision,
                                  double *recall);

// Dataset averages over same-stem PNGs of two directories.
//
// # Safety
// Both paths must be NUL-terminated strings and `out` valid.
enum MccsodStatus mccsod_evaluate_directory(const char *pred_dir,
                                            const char *gt_dir,
                                            struct MccsodMetrics *out);

// Boundary band of a mask: pixels of the mask removed by `band_width`
// erosions with a 3x3 cross. Writes 0/1 values.
//
// # Safety
// `mask` must hold `height * width` floats and `out` have the same room.
enum MccsodStatus mccsod_edge_ground_truth(const float *mask,
                                           uintptr_t height,
                                           uintptr_t width,
                                           uintptr_t band_width,
                                           float *out);

// BCE, IoU and F-measure losses of a map against a mask of the same size.
//
// # Safety
// `pred` and `gt` must each hold `height * width` floats; `out` valid.
enum MccsodStatus mccsod_saliency_loss_terms(const float *pred,
                                             const float *gt,
                                             uintptr_t height,
                                             uintptr_t width,
                                             struct MccsodLossTerms *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MCCSOD_H */
