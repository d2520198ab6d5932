#include "jist/jist.h"

#include <cstring>
#include <fstream>
#include <string>

#include "jist/bench.hpp"

struct jist_config {
  jist::BenchmarkConfig cfg;
};

struct jist_table {
  jist::MetricsTable rows;
};

struct jist_world {
  jist::BenchmarkConfig cfg;
  jist::Scenario scenario;
};

namespace {

thread_local std::string g_last_error;

jist_status fail(jist_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
jist_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const jist::Error& e) {
    return fail(static_cast<jist_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(JIST_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(JIST_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(JIST_ERR_INTERNAL, "unknown error");
  }
}

#define JIST_REQUIRE(cond, what) \
  if (!(cond)) return fail(JIST_ERR_INVALID_ARGUMENT, what)

jist::PlannerKind to_kind(jist_planner p) {
  switch (p) {
    case JIST_PLANNER_JIST: return jist::PlannerKind::jist;
    case JIST_PLANNER_OPT: return jist::PlannerKind::opt;
    case JIST_PLANNER_SAMP: return jist::PlannerKind::samp;
  }
  throw jist::Error(jist::ErrorCode::invalid_argument, "unknown planner");
}

jist_trial_result to_c(const jist::TrialResult& r) {
  jist_trial_result out{};
  out.planner = static_cast<jist_planner>(static_cast<int>(r.planner));
  out.seed = r.seed;
  out.outcome = static_cast<jist_outcome>(static_cast<int>(r.outcome));
  out.execution_time = r.execution_time;
  out.mean_compute = r.mean_compute;
  out.has_normalized_distance = r.normalized_distance.has_value();
  out.normalized_distance = r.normalized_distance.value_or(0.0);
  out.iterations = r.iterations;
  out.world_hash = r.world_hash;
  return out;
}

}  // namespace

extern "C" {

const char* jist_last_error(void) { return g_last_error.c_str(); }

const char* jist_status_string(jist_status status) {
  switch (status) {
    case JIST_OK: return "ok";
    case JIST_ERR_BUFFER_TOO_SMALL: return "buffer_too_small";
    case JIST_ERR_INTERNAL: return "internal";
    default: break;
  }
  if (status >= JIST_ERR_INVALID_ARGUMENT && status <= JIST_ERR_PLACEMENT) {
    return jist::to_string(static_cast<jist::ErrorCode>(static_cast<int>(status)));
  }
  return "unknown";
}

jist_status jist_planner_from_string(const char* name, jist_planner* out) {
  JIST_REQUIRE(name && out, "null argument");
  return guarded([&] {
    *out = static_cast<jist_planner>(static_cast<int>(jist::planner_kind_from_string(name)));
    return JIST_OK;
  });
}

const char* jist_planner_name(jist_planner planner) {
  switch (planner) {
    case JIST_PLANNER_JIST: return "jist";
    case JIST_PLANNER_OPT: return "opt";
    case JIST_PLANNER_SAMP: return "samp";
  }
  return "unknown";
}

const char* jist_outcome_name(jist_outcome outcome) {
  return jist::to_string(static_cast<jist::Outcome>(static_cast<int>(outcome)));
}

jist_status jist_config_create(const char* env, jist_config** out) {
  JIST_REQUIRE(env && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new jist_config{jist::default_benchmark(jist::env_kind_from_string(env))};
    return JIST_OK;
  });
}

jist_status jist_config_load(const char* path, jist_config** out) {
  JIST_REQUIRE(path && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new jist_config{jist::load_config(path)};
    return JIST_OK;
  });
}

jist_status jist_config_parse(const char* json, jist_config** out) {
  JIST_REQUIRE(json && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new jist_config{jist::config_from_json(json)};
    return JIST_OK;
  });
}

jist_status jist_config_set(jist_config* cfg, const char* key, const char* value) {
  JIST_REQUIRE(cfg && key && value, "null argument");
  return guarded([&] {
    jist::BenchmarkConfig updated = cfg->cfg;
    jist::set_param(updated, key, value);
    cfg->cfg = std::move(updated);
    return JIST_OK;
  });
}

jist_status jist_config_to_json(const jist_config* cfg, char* buf, size_t cap, size_t* needed) {
  JIST_REQUIRE(cfg, "null config");
  return guarded([&] {
    const std::string text = jist::config_to_json(cfg->cfg);
    if (needed) *needed = text.size() + 1;
    if (!buf || cap < text.size() + 1) return fail(JIST_ERR_BUFFER_TOO_SMALL, "buffer too small for config JSON");
    std::memcpy(buf, text.c_str(), text.size() + 1);
    return JIST_OK;
  });
}

jist_status jist_config_save(const jist_config* cfg, const char* path) {
  JIST_REQUIRE(cfg && path, "null argument");
  return guarded([&] {
    jist::save_config(cfg->cfg, path);
    return JIST_OK;
  });
}

void jist_config_free(jist_config* cfg) { delete cfg; }

jist_status jist_run_trial(const jist_config* cfg, jist_planner planner, uint64_t seed, const char* trace_path,
                           jist_trial_result* out) {
  JIST_REQUIRE(cfg && out, "null argument");
  return guarded([&] {
    jist::TrialOptions opts;
    std::ofstream trace;
    if (trace_path) {
      trace.open(trace_path);
      if (!trace) return fail(JIST_ERR_IO, std::string("cannot write trace ") + trace_path);
      opts.trace = &trace;
    }
    *out = to_c(jist::run_trial(to_kind(planner), cfg->cfg, seed, opts));
    return JIST_OK;
  });
}

jist_status jist_run_replay(const jist_config* cfg, jist_planner planner, const char* script_path, uint64_t seed,
                            jist_trial_result* out) {
  JIST_REQUIRE(cfg && script_path && out, "null argument");
  return guarded([&] {
    std::ifstream in(script_path);
    if (!in) return fail(JIST_ERR_IO, std::string("cannot read world script ") + script_path);
    const jist::WorldScript script = jist::WorldScript::read_text(in);
    *out = to_c(jist::run_replay_trial(to_kind(planner), cfg->cfg, script, seed));
    return JIST_OK;
  });
}

jist_status jist_run_benchmark(const jist_config* cfg, const char* trace_dir, jist_table** out) {
  JIST_REQUIRE(cfg && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    jist::BenchmarkOptions opts;
    if (trace_dir) opts.trace_dir = trace_dir;
    *out = new jist_table{jist::run_benchmark(cfg->cfg, opts)};
    return JIST_OK;
  });
}

size_t jist_table_size(const jist_table* table) { return table ? table->rows.size() : 0; }

jist_status jist_table_row_at(const jist_table* table, size_t index, jist_table_row* out) {
  JIST_REQUIRE(table && out, "null argument");
  if (index >= table->rows.size()) return fail(JIST_ERR_OUT_OF_RANGE, "row index out of range");
  const jist::MetricsRow& r = table->rows[index];
  jist_table_row row{};
  row.planner = static_cast<jist_planner>(static_cast<int>(r.planner));
  row.has_axis_value = r.axis_value.has_value();
  row.axis_value = r.axis_value.value_or(0.0);
  row.success = r.success;
  row.has_exec_time = r.exec_time.has_value();
  row.exec_time = r.exec_time.value_or(0.0);
  row.compute_time = r.compute_time;
  row.has_norm_dist = r.norm_dist.has_value();
  row.norm_dist = r.norm_dist.value_or(0.0);
  row.n_trials = r.n_trials;
  *out = row;
  return JIST_OK;
}

jist_status jist_table_write_csv(const jist_table* table, const char* path) {
  JIST_REQUIRE(table && path, "null argument");
  return guarded([&] {
    jist::write_csv(table->rows, std::filesystem::path(path));
    return JIST_OK;
  });
}

void jist_table_free(jist_table* table) { delete table; }

jist_status jist_world_create(const jist_config* cfg, uint64_t seed, jist_world** out) {
  JIST_REQUIRE(cfg && out, "null argument");
  *out = nullptr;
  return guarded([&] {
    cfg->cfg.env.validate();
    *out = new jist_world{cfg->cfg, jist::make_env(cfg->cfg.env, seed)};
    (*out)->scenario.world.set_recording(true);
    return JIST_OK;
  });
}

jist_status jist_world_step(jist_world* world, double dt) {
  JIST_REQUIRE(world, "null world");
  return guarded([&] {
    world->scenario.world.step_world(dt);
    return JIST_OK;
  });
}

jist_status jist_world_time(const jist_world* world, double* out) {
  JIST_REQUIRE(world && out, "null argument");
  *out = world->scenario.world.time();
  return JIST_OK;
}

jist_status jist_world_start_goal(const jist_world* world, double start[6], double goal[6]) {
  JIST_REQUIRE(world && start && goal, "null argument");
  for (int i = 0; i < 6; ++i) {
    start[i] = world->scenario.start[i];
    goal[i] = world->scenario.goal[i];
  }
  return JIST_OK;
}

jist_status jist_world_obstacle_count(const jist_world* world, size_t* out) {
  JIST_REQUIRE(world && out, "null argument");
  *out = world->scenario.world.footprints().size();
  return JIST_OK;
}

jist_status jist_world_write_script(const jist_world* world, const char* path) {
  JIST_REQUIRE(world && path, "null argument");
  return guarded([&] {
    std::ofstream os(path);
    if (!os) return fail(JIST_ERR_IO, std::string("cannot write ") + path);
    world->scenario.world.script().write_text(os);
    if (!os) return fail(JIST_ERR_IO, std::string("write failed for ") + path);
    return JIST_OK;
  });
}

jist_status jist_world_write_sdf(const jist_world* world, double cx, double cy, const char* path) {
  JIST_REQUIRE(world && path, "null argument");
  return guarded([&] {
    std::ofstream os(path);
    if (!os) return fail(JIST_ERR_IO, std::string("cannot write ") + path);
    world->scenario.world.observe_sdf(jist::Vec2(cx, cy)).write_text(os);
    if (!os) return fail(JIST_ERR_IO, std::string("write failed for ") + path);
    return JIST_OK;
  });
}

void jist_world_free(jist_world* world) { delete world; }

}  // extern "C"
