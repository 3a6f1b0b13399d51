/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef PANOTRACK_H
#define PANOTRACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum PtStatus {
  PT_STATUS_OK = 0,
  PT_STATUS_NULL_POINTER = 1,
  PT_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or a record that does not match its schema.
   */
  PT_STATUS_SCHEMA = 3,
  /**
   * A parameter or configuration outside its valid range.
   */
  PT_STATUS_INVALID_ARGUMENT = 4,
  /**
   * Evaluation had no ground truth left to score.
   */
  PT_STATUS_EMPTY_GROUND_TRUTH = 5,
  /**
   * A point behind the camera, an unknown view or a degenerate pose.
   */
  PT_STATUS_GEOMETRY = 6,
  /**
   * Frames pushed out of order.
   */
  PT_STATUS_FRAME_ORDER = 7,
  PT_STATUS_PANIC = 8,
} PtStatus;

/**
 * A camera rig. Create with `pt_rig_from_json` or `pt_rig_quad`.
 */
typedef struct PtRig PtRig;

/**
 * A streaming tracker bound to a copy of a rig.
 */
typedef struct PtTracker PtTracker;

/**
 * Tracker settings. Obtain defaults from `pt_tracker_config_default`.
 */
typedef struct PtTrackerConfig {
  /**
   * A match is accepted only when its cost is strictly below this.
   */
  double epsilon;
  /**
   * Frames a track survives without a match.
   */
  uint32_t max_lifespan;
  /**
   * Cross-view duplicate merge radius in meters; 0 disables merging.
   */
  double merge_radius_m;
  double body_height_m;
  /**
   * Non-zero to associate on trajectory cost alone.
   */
  uint8_t trajectory_only;
  /**
   * Weight kept on a track's old appearance; negative keeps the latest.
   */
  double ema_beta;
} PtTrackerConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *pt_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pt_version(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void pt_string_free(char *s);

/**
 * Parses and validates a rig description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum PtStatus pt_rig_from_json(const char *json, struct PtRig **out);

/**
 * Four views at yaw 0, 90, 180 and 270 degrees with a 90 degree field of view.
 *
 * # Safety
 * `out` must be writable.
 */
enum PtStatus pt_rig_quad(uint32_t width,
                          uint32_t height,
                          double body_height_m,
                          struct PtRig **out);

/**
 * # Safety
 * `rig` must come from a rig constructor and not have been freed.
 */
void pt_rig_free(struct PtRig *rig);

/**
 * Number of views in the rig, 0 for NULL.
 *
 * # Safety
 * `rig` must be NULL or a live handle.
 */
size_t pt_rig_view_count(const struct PtRig *rig);

/**
 * Pixel coordinates of a panorama-frame point in one view.
 *
 * # Safety
 * `rig` must be a live handle; `out_u` and `out_v` must be writable.
 */
enum PtStatus pt_project(const struct PtRig *rig,
                         uint32_t view_id,
                         double x,
                         double y,
                         double z,
                         double *out_u,
                         double *out_v);

/**
 * Ground-plane location from a reference column and pixel height.
 *
 * # Safety
 * `rig` must be a live handle; `out_x` and `out_z` must be writable.
 */
enum PtStatus pt_localize(const struct PtRig *rig,
                          uint32_t view_id,
                          double u_ref,
                          double pixel_height,
                          double *out_x,
                          double *out_z);

/**
 * One minus the cosine similarity of two vectors of length `dim`.
 *
 * # Safety
 * `a` and `b` must point to `dim` readable doubles; `out` must be writable.
 */
enum PtStatus pt_appearance_cost(const double *a, const double *b, size_t dim, double *out);

/**
 * Motion cost between a predicted and a detected ground-plane location.
 */
double pt_trajectory_cost(double px, double pz, double dx, double dz, double body_height_m);

/**
 * Minimum-cost assignment over a row-major `rows` x `cols` matrix.
 * `row_to_col[i]` receives the matched column of row `i`, or -1.
 *
 * # Safety
 * `costs` must hold `rows * cols` doubles; `row_to_col` must hold `rows` slots.
 */
enum PtStatus pt_solve_assignment(const double *costs,
                                  size_t rows,
                                  size_t cols,
                                  int64_t *row_to_col);

struct PtTrackerConfig pt_tracker_config_default(void);

/**
 * Creates a tracker. `config` may be NULL for defaults.
 *
 * # Safety
 * `rig` must be a live handle, `config` NULL or readable, `out` writable.
 */
enum PtStatus pt_tracker_new(const struct PtRig *rig,
                             const struct PtTrackerConfig *config,
                             struct PtTracker **out);

/**
 * # Safety
 * `tracker` must come from `pt_tracker_new` and not have been freed.
 */
void pt_tracker_free(struct PtTracker *tracker);

/**
 * Feeds one frame of detections (JSON Lines, the same records the command
 * line reads; the `frame` field of each record is ignored in favour of
 * `frame`). On success `*out_jsonl` receives the tracklet records for every
 * frame stepped, including skipped-over empty frames. Detections whose pose
 * cannot be localized are dropped; their count goes to `*out_skipped` when
 * that pointer is non-NULL.
 *
 * # Safety
 * `tracker` must be a live handle, `detections_jsonl` a NUL-terminated
 * string, `out_jsonl` writable.
 */
enum PtStatus pt_tracker_push_json(struct PtTracker *tracker,
                                   uint64_t frame,
                                   const char *detections_jsonl,
                                   char **out_jsonl,
                                   size_t *out_skipped);

/**
 * Scores predictions against ground truth, both as JSON Lines with at
 * least `frame`, `id`, `x` and `z`. `*out_report_json` receives the report
 * as a JSON object. Uses the default localization-precision thresholds
 * and no radius filter.
 *
 * # Safety
 * Both inputs must be NUL-terminated strings; `out_report_json` writable.
 */
enum PtStatus pt_evaluate_json(const char *gt_jsonl,
                               const char *pred_jsonl,
                               double dist_threshold_m,
                               char **out_report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PANOTRACK_H */
