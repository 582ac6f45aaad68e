#ifndef RKHS_MOTION_H
#define RKHS_MOTION_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum RmStatus {
  RM_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RM_STATUS_NULL_POINTER = 1,
  /**
   * An argument was out of range or a buffer had the wrong length.
   */
  RM_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Text input (TOML or UTF-8) could not be parsed.
   */
  RM_STATUS_PARSE = 3,
  /**
   * Settings or scene were rejected by validation.
   */
  RM_STATUS_CONFIG = 4,
  /**
   * A linear solve or root iteration failed.
   */
  RM_STATUS_NUMERICAL = 5,
  /**
   * Unexpected internal failure; the message has details.
   */
  RM_STATUS_INTERNAL = 6,
} RmStatus;

/**
 * Opaque scene handle.
 */
typedef struct RmScene RmScene;

/**
 * Opaque trajectory handle.
 */
typedef struct RmTrajectory RmTrajectory;

/**
 * Summary of a [`rm_plan`] run.
 */
typedef struct RmPlanSummary {
  size_t iterations;
  /**
   * Obstacle cost under the dense path-integral reference.
   */
  double dense_cost;
  /**
   * Smallest signed body-point distance over 2000 samples.
   */
  double clearance;
  /**
   * 1 when `clearance > 0`.
   */
  int32_t collision_free;
} RmPlanSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *rm_last_error(void);

/**
 * Library version as a static string.
 */
const char *rm_version(void);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void rm_string_free(char *s);

/**
 * Parse a scene from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum RmStatus rm_scene_from_toml(const char *toml, struct RmScene **out);

/**
 * Generate a random scene for the bundled 3-link arm.
 *
 * # Safety
 * `out` must be writable.
 */
enum RmStatus rm_scene_generate(uint64_t seed, size_t obstacles, struct RmScene **out);

/**
 * Serialize a scene to TOML. Free the result with [`rm_string_free`].
 *
 * # Safety
 * `scene` must be a live handle; `out` must be writable.
 */
enum RmStatus rm_scene_to_toml(const struct RmScene *scene, char **out);

/**
 * Joint count of the scene's arm.
 *
 * # Safety
 * `scene` must be a live handle; `out` must be writable.
 */
enum RmStatus rm_scene_dof(const struct RmScene *scene, size_t *out);

/**
 * Destroy a scene. Null is ignored.
 *
 * # Safety
 * `scene` must come from this library and not have been freed.
 */
void rm_scene_free(struct RmScene *scene);

/**
 * Optimize a trajectory for `scene`. `config_toml` holds plan settings in
 * the CLI's config format and may be null for the defaults. `summary` may be
 * null.
 *
 * # Safety
 * Pointers must be valid as described; `out` must be writable.
 */
enum RmStatus rm_plan(const struct RmScene *scene,
                      const char *config_toml,
                      struct RmTrajectory **out,
                      struct RmPlanSummary *summary);

/**
 * Joint count of a trajectory.
 *
 * # Safety
 * `traj` must be a live handle; `out` must be writable.
 */
enum RmStatus rm_trajectory_dof(const struct RmTrajectory *traj, size_t *out);

/**
 * Configuration at time `t ∈ [0, 1]` into `q[0..len]`, `len` = dof.
 *
 * # Safety
 * `traj` must be a live handle; `q` must hold `len` doubles.
 */
enum RmStatus rm_trajectory_eval(const struct RmTrajectory *traj, double t, double *q, size_t len);

/**
 * Number of kernel sections.
 *
 * # Safety
 * `traj` must be a live handle; `out` must be writable.
 */
enum RmStatus rm_trajectory_support_len(const struct RmTrajectory *traj, size_t *out);

/**
 * Support times into `times[0..n]` and coefficients row-major into
 * `coeffs[0..n*dof]`, where `n` is the support length.
 *
 * # Safety
 * `traj` must be a live handle; buffers must hold the stated lengths.
 */
enum RmStatus rm_trajectory_support(const struct RmTrajectory *traj,
                                    double *times,
                                    size_t times_len,
                                    double *coeffs,
                                    size_t coeffs_len);

/**
 * Destroy a trajectory. Null is ignored.
 *
 * # Safety
 * `traj` must come from this library and not have been freed.
 */
void rm_trajectory_free(struct RmTrajectory *traj);

/**
 * Gauss-Legendre rule with `n` nodes on `[0, 1]`.
 *
 * # Safety
 * `nodes` and `weights` must each hold `n` doubles.
 */
enum RmStatus rm_quadrature(size_t n, double *nodes, double *weights);

/**
 * Scalar kernel value `k(t, s)` for a kernel described by a TOML table
 * (keys `family`, `sigma`, ...); null gives the default kernel.
 *
 * # Safety
 * `kernel_toml` must be null or NUL-terminated; `out` must be writable.
 */
enum RmStatus rm_kernel_eval(const char *kernel_toml, double t, double s, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RKHS_MOTION_H */
