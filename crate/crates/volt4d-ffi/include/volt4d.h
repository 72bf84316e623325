#ifndef VOLT4D_H
#define VOLT4D_H

/* Generated from the volt4d-ffi crate; edit the Rust source instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum V4dStatus {
  V4D_STATUS_OK = 0,
  /**
   * A pointer argument was null.
   */
  V4D_STATUS_NULL_POINTER = 1,
  /**
   * An argument value was rejected (bad arch name, bad configuration,
   * out-of-range geometry, empty input).
   */
  V4D_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Tensor or buffer dimensions did not match.
   */
  V4D_STATUS_SHAPE = 3,
  /**
   * Filesystem failure.
   */
  V4D_STATUS_IO = 4,
  /**
   * A file exists but its contents are malformed, corrupt, or of a
   * foreign version.
   */
  V4D_STATUS_FORMAT = 5,
  /**
   * A numeric invariant broke (non-finite loss, undefined correlation).
   */
  V4D_STATUS_NUMERIC = 6,
  /**
   * An internal panic was caught at the boundary.
   */
  V4D_STATUS_PANIC = 7,
} V4dStatus;

/**
 * Opaque handle to a generated dataset directory.
 */
typedef struct V4dDataset V4dDataset;

/**
 * Opaque trained or freshly initialized network.
 */
typedef struct V4dModel V4dModel;

/**
 * Shape and split summary of an open dataset.
 */
typedef struct V4dDatasetInfo {
  uint32_t rois;
  uint32_t trajectories_per_roi;
  uint64_t volume_size;
  uint64_t sequence_length;
  uint32_t train_rois;
  uint32_t val_rois;
  uint32_t test_rois;
  uint64_t master_seed;
  double noise_sigma;
} V4dDatasetInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread. Never null; empty
 * before the first failure.
 */
const char *v4d_last_error_message(void);

/**
 * Build a freshly initialized model. `arch` is one of `2-path-cnn3d`,
 * `n-path-cnn3d`, `cnn4d`, `n-path-cnn4d`, `gru-cnn3d`. On success `*out`
 * owns the model; release it with [`v4d_model_free`].
 *
 * # Safety
 * `arch` must be null or NUL-terminated; `out` must be a valid pointer.
 */
enum V4dStatus v4d_model_build(const char *arch,
                               uint64_t seed,
                               size_t volume_size,
                               size_t sequence_length,
                               struct V4dModel **out);

/**
 * Build a model from a checkpoint file. The architecture and seed come
 * from the checkpoint; the volume dimensions must match the ones it was
 * trained with.
 *
 * # Safety
 * `path` must be null or NUL-terminated; `out` must be a valid pointer.
 */
enum V4dStatus v4d_model_load(const char *path,
                              size_t volume_size,
                              size_t sequence_length,
                              struct V4dModel **out);

/**
 * Release a model. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a pointer returned by a `v4d_model_*`
 * constructor, not yet freed.
 */
void v4d_model_free(struct V4dModel *model);

/**
 * Number of trainable scalars.
 *
 * # Safety
 * Pointers must be valid or null.
 */
enum V4dStatus v4d_model_parameter_count(const struct V4dModel *model, uint64_t *out);

/**
 * Architecture name, written NUL-terminated into `buf` (capacity
 * `buf_len`).
 *
 * # Safety
 * `buf` must point to at least `buf_len` writable bytes.
 */
enum V4dStatus v4d_model_arch(const struct V4dModel *model, char *buf, size_t buf_len);

/**
 * Run one forward pass. `volumes` holds `sequence_length * volume_size^3`
 * doubles in (time, depth, height, width) order with a single channel;
 * `out_motion` receives 9 doubles: ds_now, ds_plus1, ds_plus2 as
 * (z, y, x) mm triples.
 *
 * # Safety
 * `volumes` must point to `volumes_len` readable doubles and `out_motion`
 * to 9 writable doubles.
 */
enum V4dStatus v4d_model_predict(const struct V4dModel *model,
                                 const double *volumes,
                                 size_t volumes_len,
                                 double *out_motion);

/**
 * Generate a dataset into `dir` (created if needed).
 *
 * # Safety
 * `dir` must be null or NUL-terminated.
 */
enum V4dStatus v4d_generate_dataset(const char *dir,
                                    uint32_t rois,
                                    uint32_t trajectories,
                                    size_t volume_size,
                                    uint32_t val_rois,
                                    uint32_t test_rois,
                                    double noise_sigma,
                                    uint64_t seed);

/**
 * Open a dataset directory. Release with [`v4d_dataset_free`].
 *
 * # Safety
 * `dir` must be null or NUL-terminated; `out` must be valid.
 */
enum V4dStatus v4d_dataset_open(const char *dir, struct V4dDataset **out);

/**
 * Release a dataset handle. Null is a no-op.
 *
 * # Safety
 * `dataset` must be null or an unfreed pointer from [`v4d_dataset_open`].
 */
void v4d_dataset_free(struct V4dDataset *dataset);

/**
 * Fill `info` with the dataset's shape and split counts.
 *
 * # Safety
 * Pointers must be valid or null.
 */
enum V4dStatus v4d_dataset_info(const struct V4dDataset *dataset, struct V4dDatasetInfo *info);

/**
 * Which split a ROI belongs to: 0 train, 1 val, 2 test.
 *
 * # Safety
 * Pointers must be valid or null.
 */
enum V4dStatus v4d_dataset_roi_split(const struct V4dDataset *dataset,
                                     uint32_t roi,
                                     uint32_t *split_out);

/**
 * Load one sample. `volumes` receives `sequence_length * volume_size^3`
 * doubles (time-major, single channel) and `labels` receives 9 doubles.
 *
 * # Safety
 * `volumes` must point to `volumes_len` writable doubles and `labels` to 9
 * writable doubles.
 */
enum V4dStatus v4d_dataset_sample(const struct V4dDataset *dataset,
                                  uint32_t roi,
                                  uint32_t trajectory,
                                  double *volumes,
                                  size_t volumes_len,
                                  double *labels);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* VOLT4D_H */
