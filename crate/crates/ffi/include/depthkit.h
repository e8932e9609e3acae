#ifndef DEPTHKIT_H
#define DEPTHKIT_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DkStatus {
  DK_STATUS_OK = 0,
  DK_STATUS_NULL_POINTER = 1,
  DK_STATUS_INVALID_ARGUMENT = 2,
  DK_STATUS_SHAPE_MISMATCH = 3,
  DK_STATUS_NO_VALID_DATA = 4,
  DK_STATUS_FORMAT_ERROR = 5,
  DK_STATUS_IO_ERROR = 6,
  DK_STATUS_PANIC = 7,
} DkStatus;

typedef enum DkDepthFormat {
  DK_DEPTH_FORMAT_PGM16 = 0,
  DK_DEPTH_FORMAT_PFM32 = 1,
  DK_DEPTH_FORMAT_CSV_POINTS = 2,
} DkDepthFormat;

typedef enum DkFitStatus {
  DK_FIT_STATUS_FITTED = 0,
  DK_FIT_STATUS_IDENTITY = 1,
  DK_FIT_STATUS_DEGENERATE_BIAS = 2,
} DkFitStatus;

/**
 * Opaque dense or sparse depth map.
 */
typedef struct DkDepthMap DkDepthMap;

/**
 * Opaque segment label map.
 */
typedef struct DkSegmentMap DkSegmentMap;

typedef struct DkSegmenterConfig {
  double join_threshold;
  size_t min_segment_pixels;
  /**
   * 4 or 8.
   */
  uint8_t connectivity;
} DkSegmenterConfig;

typedef struct DkAffineFit {
  double a;
  double b;
  enum DkFitStatus status;
  size_t points;
} DkAffineFit;

/**
 * Metrics with the default thresholds 1.25, 1.25², 1.25³.
 */
typedef struct DkMetrics {
  double rmse;
  double mae;
  double irmse;
  double imae;
  double silog;
  double rel;
  double delta[3];
  /**
   * Valid only when `has_silog_segment` is nonzero.
   */
  double silog_segment;
  uint8_t has_silog_segment;
  size_t valid_pixel_count;
} DkMetrics;

typedef struct DkLoss {
  double mse;
  double ssim;
  double total;
} DkLoss;

typedef struct DkPairConfig {
  /**
   * 0 = formula, 1 = random.
   */
  uint8_t alpha_random;
  /**
   * 0 = uniform, 1 = zero.
   */
  uint8_t beta_zero;
  /**
   * Negative selects the default (1% of the mean sparse depth).
   */
  double sigma;
  uint64_t seed;
  double clamp_floor;
  size_t max_passes;
} DkPairConfig;

typedef struct DkSceneConfig {
  size_t width;
  size_t height;
  size_t regions;
  double depth_min;
  double depth_max;
  /**
   * 0 = planar, 1 = constant.
   */
  uint8_t constant_regions;
  /**
   * 0 = random per-region distortion, 1 = identity.
   */
  uint8_t identity_distortion;
  double rel_noise;
  uint64_t seed;
} DkSceneConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *dk_last_error(void);

/**
 * Copies `width * height` row-major values into a new map.
 */
enum DkStatus dk_depth_new(size_t width,
                           size_t height,
                           const double *data,
                           struct DkDepthMap **out);

void dk_depth_free(struct DkDepthMap *map);

/**
 * Width in pixels, or 0 for a null handle.
 */
size_t dk_depth_width(const struct DkDepthMap *map);

size_t dk_depth_height(const struct DkDepthMap *map);

/**
 * Copies the values into `out`, which must hold `len >= width * height`
 * doubles.
 */
enum DkStatus dk_depth_copy_data(const struct DkDepthMap *map, double *out, size_t len);

/**
 * Reads a depth file. `width`/`height` give the grid for `csv-points`
 * and are ignored for the image formats.
 */
enum DkStatus dk_depth_read(const char *path,
                            enum DkDepthFormat format,
                            size_t width,
                            size_t height,
                            struct DkDepthMap **out);

enum DkStatus dk_depth_write(const struct DkDepthMap *map,
                             const char *path,
                             enum DkDepthFormat format);

enum DkStatus dk_normalize(const struct DkDepthMap *map, struct DkDepthMap **out);

enum DkStatus dk_sample_sparse(const struct DkDepthMap *gt,
                               size_t n,
                               uint64_t seed,
                               struct DkDepthMap **out);

/**
 * Copies a label grid. Labels must be dense in `0..=K`.
 */
enum DkStatus dk_segments_new(size_t width,
                              size_t height,
                              const uint32_t *labels,
                              struct DkSegmentMap **out);

void dk_segments_free(struct DkSegmentMap *seg);

/**
 * Number of nonzero segments, or 0 for a null handle.
 */
uint32_t dk_segments_count(const struct DkSegmentMap *seg);

enum DkStatus dk_segments_copy_labels(const struct DkSegmentMap *seg, uint32_t *out, size_t len);

enum DkStatus dk_segments_read(const char *path, struct DkSegmentMap **out);

enum DkStatus dk_segments_write(const struct DkSegmentMap *seg, const char *path);

enum DkStatus dk_segment_from_depth(const struct DkDepthMap *rel,
                                    struct DkSegmenterConfig config,
                                    struct DkSegmentMap **out);

/**
 * Least-squares scale and bias from relative depth to the sparse points.
 */
enum DkStatus dk_fit_global(const struct DkDepthMap *rel,
                            const struct DkDepthMap *sparse,
                            struct DkAffineFit *out);

/**
 * Completes `rel` with an affine fit: global when `seg` is null,
 * per segment otherwise.
 */
enum DkStatus dk_complete_affine(const struct DkDepthMap *rel,
                                 const struct DkDepthMap *sparse,
                                 const struct DkSegmentMap *seg,
                                 struct DkDepthMap **out);

/**
 * Metric suite; `seg` may be null to skip segment SILog.
 */
enum DkStatus dk_evaluate(const struct DkDepthMap *pred,
                          const struct DkDepthMap *gt,
                          const struct DkSegmentMap *seg,
                          struct DkMetrics *out);

/**
 * MSE + `lambda`·SSIM loss with the default 11×11 window.
 */
enum DkStatus dk_total_loss(const struct DkDepthMap *pred,
                            const struct DkDepthMap *target,
                            double lambda,
                            struct DkLoss *out);

/**
 * Synthetic pair from a relative map, its segments and a real sparse map.
 */
enum DkStatus dk_generate_pair(const struct DkDepthMap *rel,
                               const struct DkSegmentMap *seg,
                               const struct DkDepthMap *sparse,
                               struct DkPairConfig config,
                               struct DkDepthMap **out_dense,
                               struct DkDepthMap **out_sparse);

/**
 * Generates a synthetic scene. All three outputs are required.
 */
enum DkStatus dk_generate_scene(struct DkSceneConfig config,
                                struct DkDepthMap **out_gt,
                                struct DkSegmentMap **out_labels,
                                struct DkDepthMap **out_rel);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DEPTHKIT_H */
