#ifndef QDTRAJ_H
#define QDTRAJ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Post-grasp action space.
 */
typedef enum QdtrajActionSpace {
  QdtrajActionSpace_Adaptive = 0,
  QdtrajActionSpace_Where2act = 1,
  QdtrajActionSpace_Vatmart = 2,
} QdtrajActionSpace;

/**
 * Result of every fallible call.
 */
typedef enum QdtrajStatus {
  QdtrajStatus_Ok = 0,
  /**
   * A pointer argument was NULL or an argument was out of range.
   */
  QdtrajStatus_InvalidArgument = 1,
  /**
   * The activation task does not fit the object.
   */
  QdtrajStatus_InvalidTask = 2,
  /**
   * The URDF text could not be parsed into a supported model.
   */
  QdtrajStatus_ParseError = 3,
  /**
   * A filesystem operation failed.
   */
  QdtrajStatus_IoError = 4,
  /**
   * The optimizer rejected its configuration or failed internally.
   */
  QdtrajStatus_RuntimeError = 5,
} QdtrajStatus;

/**
 * Grasp selection strategy.
 */
typedef enum QdtrajStrategy {
  QdtrajStrategy_Explore = 0,
  QdtrajStrategy_Success = 1,
  QdtrajStrategy_Random = 2,
} QdtrajStrategy;

/**
 * Opaque archive handle (result of a run).
 */
typedef struct QdtrajArchive QdtrajArchive;

/**
 * Opaque articulated-object handle.
 */
typedef struct QdtrajObject QdtrajObject;

/**
 * Parameters of one optimization run. Use `qdtraj_run_params_default` to
 * initialize, then override fields.
 */
typedef struct QdtrajRunParams {
  /**
   * Index into the object's movable joints.
   */
  uint32_t joint_index;
  double s_init;
  double s_target;
  enum QdtrajStrategy strategy;
  enum QdtrajActionSpace action_space;
  uint32_t population;
  uint32_t generations;
  uint64_t seed;
  /**
   * Behavioral grid cell size, meters.
   */
  double cell_size;
  /**
   * Fitness at or above which a trajectory counts as successful.
   */
  double success_threshold;
} QdtrajRunParams;

/**
 * Summary of one archive cell, for iteration from C.
 */
typedef struct QdtrajCellInfo {
  /**
   * Descriptor cell indices.
   */
  int64_t i;
  int64_t j;
  int64_t k;
  /**
   * Grasp position of the elite, object base frame, meters.
   */
  double x;
  double y;
  double z;
  double fitness;
  /**
   * Joint value at detachment.
   */
  double s_drop;
} QdtrajCellInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message for this thread, NUL terminated. Never NULL. Valid
 * until the next failing call on the same thread.
 */
const char *qdtraj_last_error_message(void);

/**
 * Creates the builtin articulated box (door hinge + sliding tray).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QdtrajStatus qdtraj_object_builtin_box(struct QdtrajObject **out);

/**
 * Parses a NUL-terminated URDF document.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum QdtrajStatus qdtraj_object_from_urdf(const char *text, struct QdtrajObject **out);

/**
 * Frees an object handle. NULL is a no-op.
 *
 * # Safety
 * `object` must come from this library and not be freed twice.
 */
void qdtraj_object_free(struct QdtrajObject *object);

/**
 * Number of movable joints of an object.
 *
 * # Safety
 * `object` and `out` must be valid pointers.
 */
enum QdtrajStatus qdtraj_object_movable_joint_count(const struct QdtrajObject *object,
                                                    uintptr_t *out);

/**
 * Default run parameters (explore + adaptive, desk scale, seed 0).
 */
struct QdtrajRunParams qdtraj_run_params_default(void);

/**
 * Runs the optimizer and returns a new archive handle.
 *
 * # Safety
 * `object`, `params`, and `out` must be valid pointers.
 */
enum QdtrajStatus qdtraj_run(const struct QdtrajObject *object,
                             const struct QdtrajRunParams *params,
                             struct QdtrajArchive **out);

/**
 * Frees an archive handle. NULL is a no-op.
 *
 * # Safety
 * `archive` must come from this library and not be freed twice.
 */
void qdtraj_archive_free(struct QdtrajArchive *archive);

/**
 * Number of occupied cells.
 *
 * # Safety
 * `archive` and `out` must be valid pointers.
 */
enum QdtrajStatus qdtraj_archive_cell_count(const struct QdtrajArchive *archive, uintptr_t *out);

/**
 * Number of cells whose fitness reached the run's success threshold.
 *
 * # Safety
 * `archive` and `out` must be valid pointers.
 */
enum QdtrajStatus qdtraj_archive_successful_count(const struct QdtrajArchive *archive,
                                                  uintptr_t *out);

/**
 * Best fitness over the archive (0 when empty).
 *
 * # Safety
 * `archive` and `out` must be valid pointers.
 */
enum QdtrajStatus qdtraj_archive_best_fitness(const struct QdtrajArchive *archive, double *out);

/**
 * Summary of the cell at `index` (cells are ordered by descriptor key;
 * index must be < cell count).
 *
 * # Safety
 * `archive` and `out` must be valid pointers.
 */
enum QdtrajStatus qdtraj_archive_cell(const struct QdtrajArchive *archive,
                                      uintptr_t index,
                                      struct QdtrajCellInfo *out);

/**
 * Writes archive.json, metrics.csv, and trajectories/ into `dir`
 * (created if needed).
 *
 * # Safety
 * `archive` must be valid and `dir` a valid NUL-terminated path.
 */
enum QdtrajStatus qdtraj_archive_write(const struct QdtrajArchive *archive, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDTRAJ_H */
