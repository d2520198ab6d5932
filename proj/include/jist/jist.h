/*
 * C interface to the planner benchmark library.
 *
 * All functions return a jist_status. On failure, jist_last_error() returns
 * a message for the calling thread that stays valid until the next call on
 * that thread. Handles are opaque and must be released with the matching
 * *_free function; passing NULL to *_free is a no-op.
 */
#ifndef JIST_JIST_H
#define JIST_JIST_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define JIST_API __declspec(dllexport)
#else
#define JIST_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum jist_status {
  JIST_OK = 0,
  JIST_ERR_INVALID_ARGUMENT = 1,
  JIST_ERR_UNKNOWN_VARIABLE = 2,
  JIST_ERR_ARITY_MISMATCH = 3,
  JIST_ERR_NON_EDGE = 4,
  JIST_ERR_DIMENSION_MISMATCH = 5,
  JIST_ERR_SINGULAR_SYSTEM = 6,
  JIST_ERR_NON_FINITE = 7,
  JIST_ERR_OUT_OF_RANGE = 8,
  JIST_ERR_CONFIG = 9,
  JIST_ERR_IO = 10,
  JIST_ERR_PLACEMENT = 11,
  JIST_ERR_BUFFER_TOO_SMALL = 12,
  JIST_ERR_INTERNAL = 99
} jist_status;

typedef enum jist_planner { JIST_PLANNER_JIST = 0, JIST_PLANNER_OPT = 1, JIST_PLANNER_SAMP = 2 } jist_planner;

typedef enum jist_outcome {
  JIST_OUTCOME_SUCCESS = 0,
  JIST_OUTCOME_COLLISION = 1,
  JIST_OUTCOME_TIMEOUT = 2,
  JIST_OUTCOME_FAILURE = 3
} jist_outcome;

typedef struct jist_config jist_config;
typedef struct jist_table jist_table;
typedef struct jist_world jist_world;

typedef struct jist_trial_result {
  jist_planner planner;
  uint64_t seed;
  jist_outcome outcome;
  double execution_time;
  double mean_compute;
  /* Valid only when has_normalized_distance is nonzero. */
  double normalized_distance;
  int has_normalized_distance;
  size_t iterations;
  uint64_t world_hash;
} jist_trial_result;

typedef struct jist_table_row {
  jist_planner planner;
  int has_axis_value;
  double axis_value;
  double success;
  int has_exec_time;
  double exec_time;
  double compute_time;
  int has_norm_dist;
  double norm_dist;
  size_t n_trials;
} jist_table_row;

JIST_API const char* jist_last_error(void);
JIST_API const char* jist_status_string(jist_status status);
JIST_API jist_status jist_planner_from_string(const char* name, jist_planner* out);
JIST_API const char* jist_planner_name(jist_planner planner);
JIST_API const char* jist_outcome_name(jist_outcome outcome);

/* Configuration. `env` is one of static, forest, patrol, toggle. */
JIST_API jist_status jist_config_create(const char* env, jist_config** out);
JIST_API jist_status jist_config_load(const char* path, jist_config** out);
JIST_API jist_status jist_config_parse(const char* json, jist_config** out);
JIST_API jist_status jist_config_set(jist_config* cfg, const char* key, const char* value);
/* Writes the JSON form into buf (NUL-terminated). *needed receives the size
 * including the terminator; returns JIST_ERR_BUFFER_TOO_SMALL if cap is short. */
JIST_API jist_status jist_config_to_json(const jist_config* cfg, char* buf, size_t cap, size_t* needed);
JIST_API jist_status jist_config_save(const jist_config* cfg, const char* path);
JIST_API void jist_config_free(jist_config* cfg);

/* Trials. trace_path may be NULL. */
JIST_API jist_status jist_run_trial(const jist_config* cfg, jist_planner planner, uint64_t seed, const char* trace_path,
                                    jist_trial_result* out);
/* Runs against a recorded world script instead of simulated obstacles. */
JIST_API jist_status jist_run_replay(const jist_config* cfg, jist_planner planner, const char* script_path,
                                     uint64_t seed, jist_trial_result* out);

/* Benchmark over the config's planners, trials, seed and ablation axis.
 * trace_dir may be NULL. */
JIST_API jist_status jist_run_benchmark(const jist_config* cfg, const char* trace_dir, jist_table** out);
JIST_API size_t jist_table_size(const jist_table* table);
JIST_API jist_status jist_table_row_at(const jist_table* table, size_t index, jist_table_row* out);
JIST_API jist_status jist_table_write_csv(const jist_table* table, const char* path);
JIST_API void jist_table_free(jist_table* table);

/* Worlds without a planner, for scripts and SDF dumps. */
JIST_API jist_status jist_world_create(const jist_config* cfg, uint64_t seed, jist_world** out);
JIST_API jist_status jist_world_step(jist_world* world, double dt);
JIST_API jist_status jist_world_time(const jist_world* world, double* out);
/* Six doubles: x, y, yaw, vx, vy, yaw_rate. */
JIST_API jist_status jist_world_start_goal(const jist_world* world, double start[6], double goal[6]);
JIST_API jist_status jist_world_obstacle_count(const jist_world* world, size_t* out);
JIST_API jist_status jist_world_write_script(const jist_world* world, const char* path);
/* SDF over the visibility window centered at (cx, cy). */
JIST_API jist_status jist_world_write_sdf(const jist_world* world, double cx, double cy, const char* path);
JIST_API void jist_world_free(jist_world* world);

#ifdef __cplusplus
}
#endif

#endif /* JIST_JIST_H */
