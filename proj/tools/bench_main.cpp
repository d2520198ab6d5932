// Command-line benchmark harness over the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jist/jist.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitOther = 1;

struct Failure {
  jist_status status;
  std::string message;
};

void check(jist_status s) {
  if (s != JIST_OK) throw Failure{s, jist_last_error()};
}

int exit_code(jist_status s) {
  switch (s) {
    case JIST_ERR_CONFIG:
    case JIST_ERR_INVALID_ARGUMENT:
    case JIST_ERR_PLACEMENT:
      return kExitConfig;
    case JIST_ERR_IO:
      return kExitIo;
    default:
      return kExitOther;
  }
}

struct Config {
  jist_config* ptr = nullptr;
  Config() = default;
  Config(const Config&) = delete;
  Config& operator=(const Config&) = delete;
  ~Config() { jist_config_free(ptr); }
};

struct Table {
  jist_table* ptr = nullptr;
  ~Table() { jist_table_free(ptr); }
};

struct Common {
  std::string env = "forest";
  std::string planner = "all";
  std::string config_path;
  std::vector<std::string> sets;
  long long trials = -1;
  long long seed = -1;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--env", c.env, "Environment defaults: static, forest, patrol, toggle")
      ->check(CLI::IsMember({"static", "forest", "patrol", "toggle"}));
  cmd->add_option("--planner", c.planner, "jist, opt, samp or all")->check(CLI::IsMember({"jist", "opt", "samp", "all"}));
  cmd->add_option("--config", c.config_path, "JSON config file (takes precedence over --env)");
  cmd->add_option("--set", c.sets, "Override a config key, e.g. --set jist.node_budget=60");
  cmd->add_option("--trials", c.trials, "Trials per planner")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Seed of the first trial")->check(CLI::NonNegativeNumber);
}

void set(Config& cfg, const std::string& key, const std::string& value) {
  check(jist_config_set(cfg.ptr, key.c_str(), value.c_str()));
}

void load(Config& cfg, const Common& c) {
  if (!c.config_path.empty()) {
    check(jist_config_load(c.config_path.c_str(), &cfg.ptr));
  } else {
    check(jist_config_create(c.env.c_str(), &cfg.ptr));
  }
  if (c.trials >= 0) set(cfg, "trials", std::to_string(c.trials));
  if (c.seed >= 0) set(cfg, "seed", std::to_string(c.seed));
  if (c.planner == "all") {
    set(cfg, "planners", R"(["jist","opt","samp"])");
  } else {
    set(cfg, "planners", "[\"" + c.planner + "\"]");
  }
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Failure{JIST_ERR_CONFIG, "--set expects key=value, got '" + kv + "'"};
    set(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_table(const jist_table* t) {
  for (size_t i = 0; i < jist_table_size(t); ++i) {
    jist_table_row r;
    check(jist_table_row_at(t, i, &r));
    std::printf("%-5s", jist_planner_name(r.planner));
    if (r.has_axis_value) std::printf(" axis=%-8g", r.axis_value);
    std::printf(" success=%.2f", r.success);
    if (r.has_exec_time) std::printf(" exec=%.2fs", r.exec_time);
    std::printf(" compute=%.4fs", r.compute_time);
    if (r.has_norm_dist) std::printf(" dist=%.3f", r.norm_dist);
    std::printf(" n=%zu\n", r.n_trials);
  }
}

int run_benchmark(const Common& c, const std::string& out, const std::string& trace_dir,
                  const std::vector<std::pair<std::string, std::string>>& extra) {
  Config cfg;
  load(cfg, c);
  for (const auto& [k, v] : extra) set(cfg, k, v);
  Table table;
  check(jist_run_benchmark(cfg.ptr, trace_dir.empty() ? nullptr : trace_dir.c_str(), &table.ptr));
  check(jist_table_write_csv(table.ptr, out.c_str()));
  print_table(table.ptr);
  return 0;
}

// Cartesian product of the swept values; each result row is prefixed with
// the parameter values that produced it.
int run_sweep(const Common& c, const std::vector<std::string>& params, const std::string& out) {
  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> values;
  for (const auto& p : params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw Failure{JIST_ERR_CONFIG, "--param expects key=v1,v2,..., got '" + p + "'"};
    keys.push_back(p.substr(0, eq));
    values.push_back(split(p.substr(eq + 1), ','));
    if (values.back().empty()) throw Failure{JIST_ERR_CONFIG, "--param " + keys.back() + " has no values"};
  }
  std::ofstream os(out);
  if (!os) throw Failure{JIST_ERR_IO, "cannot write " + out};
  for (const auto& k : keys) os << k << ',';
  os << "planner,success,exec_time_s,compute_time_s,norm_dist,n_trials\n";

  std::vector<std::size_t> idx(keys.size(), 0);
  while (true) {
    Config cfg;
    load(cfg, c);
    for (std::size_t i = 0; i < keys.size(); ++i) set(cfg, keys[i], values[i][idx[i]]);
    Table table;
    check(jist_run_benchmark(cfg.ptr, nullptr, &table.ptr));
    for (size_t r = 0; r < jist_table_size(table.ptr); ++r) {
      jist_table_row row;
      check(jist_table_row_at(table.ptr, r, &row));
      for (std::size_t i = 0; i < keys.size(); ++i) os << values[i][idx[i]] << ',';
      char buf[256];
      std::snprintf(buf, sizeof buf, "%s,%.4f,", jist_planner_name(row.planner), row.success);
      os << buf;
      if (row.has_exec_time) {
        std::snprintf(buf, sizeof buf, "%.4f", row.exec_time);
        os << buf;
      } else {
        os << '-';
      }
      std::snprintf(buf, sizeof buf, ",%.4f,", row.compute_time);
      os << buf;
      if (row.has_norm_dist) {
        std::snprintf(buf, sizeof buf, "%.4f", row.norm_dist);
        os << buf;
      } else {
        os << '-';
      }
      os << ',' << row.n_trials << '\n';
    }
    std::size_t k = 0;
    while (k < keys.size() && ++idx[k] == values[k].size()) idx[k++] = 0;
    if (k == keys.size()) break;
  }
  if (!os) throw Failure{JIST_ERR_IO, "write failed for " + out};
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark harness for the JIST, OPT and SAMP planners"};
  app.require_subcommand(1);

  Common run_opts;
  std::string run_out;
  std::string run_trace;
  auto* run = app.add_subcommand("run", "Run seeded trials and write a metrics CSV");
  add_common(run, run_opts);
  run->add_option("--out", run_out, "CSV output path")->required();
  run->add_option("--trace", run_trace, "Directory for per-trial iteration traces");

  Common ablate_opts;
  std::string ablate_out;
  std::string ablate_trace;
  std::string axis;
  std::string axis_values;
  auto* ablate = app.add_subcommand("ablate", "Vary one parameter axis");
  add_common(ablate, ablate_opts);
  ablate->add_option("--axis", axis, "obstacles, speed, noise or budget")
      ->required()
      ->check(CLI::IsMember({"obstacles", "speed", "noise", "budget"}));
  ablate->add_option("--values", axis_values, "Comma-separated axis values")->required();
  ablate->add_option("--out", ablate_out, "CSV output path")->required();
  ablate->add_option("--trace", ablate_trace, "Directory for per-trial iteration traces");

  Common sweep_opts;
  std::vector<std::string> sweep_params;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Grid search over config keys");
  add_common(sweep, sweep_opts);
  sweep->add_option("--param", sweep_params, "key=v1,v2,... (repeatable)")->required();
  sweep->add_option("--out", sweep_out, "CSV output path")->required();

  Common replay_opts;
  std::string script_path;
  auto* replay = app.add_subcommand("replay", "Run one planner against a recorded world script");
  add_common(replay, replay_opts);
  replay->add_option("--script", script_path, "World script file")->required()->check(CLI::ExistingFile);

  Common world_opts;
  int world_steps = 100;
  double world_dt = 0.5;
  std::string world_out;
  std::string world_sdf;
  auto* world = app.add_subcommand("world", "Simulate obstacles only and dump the world script");
  add_common(world, world_opts);
  world->add_option("--steps", world_steps, "Number of world steps")->check(CLI::NonNegativeNumber);
  world->add_option("--dt", world_dt, "Step length in seconds")->check(CLI::PositiveNumber);
  world->add_option("--out", world_out, "World script output path")->required();
  world->add_option("--sdf", world_sdf, "Also dump the final SDF around the start");

  Common config_opts;
  std::string config_out;
  auto* config = app.add_subcommand("config", "Write the default config of an environment");
  add_common(config, config_opts);
  config->add_option("--out", config_out, "JSON output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return run_benchmark(run_opts, run_out, run_trace, {});
    if (*ablate) {
      std::string list = "[";
      for (const auto& v : split(axis_values, ',')) list += (list.size() > 1 ? "," : "") + v;
      list += "]";
      return run_benchmark(ablate_opts, ablate_out, ablate_trace, {{"values", list}, {"axis", "\"" + axis + "\""}});
    }
    if (*sweep) return run_sweep(sweep_opts, sweep_params, sweep_out);
    if (*replay) {
      Config cfg;
      load(cfg, replay_opts);
      jist_planner p = JIST_PLANNER_JIST;
      if (replay_opts.planner != "all") check(jist_planner_from_string(replay_opts.planner.c_str(), &p));
      jist_trial_result r;
      check(jist_run_replay(cfg.ptr, p, script_path.c_str(), replay_opts.seed < 0 ? 0 : replay_opts.seed, &r));
      std::printf("%s %s iterations=%zu exec=%.2fs compute=%.4fs", jist_planner_name(r.planner),
                  jist_outcome_name(r.outcome), r.iterations, r.execution_time, r.mean_compute);
      if (r.has_normalized_distance) std::printf(" dist=%.3f", r.normalized_distance);
      std::printf("\n");
      return 0;
    }
    if (*world) {
      Config cfg;
      load(cfg, world_opts);
      jist_world* w = nullptr;
      check(jist_world_create(cfg.ptr, world_opts.seed < 0 ? 0 : world_opts.seed, &w));
      struct Guard {
        jist_world* w;
        ~Guard() { jist_world_free(w); }
      } guard{w};
      for (int i = 0; i < world_steps; ++i) check(jist_world_step(w, world_dt));
      check(jist_world_write_script(w, world_out.c_str()));
      if (!world_sdf.empty()) {
        double start[6];
        double goal[6];
        check(jist_world_start_goal(w, start, goal));
        check(jist_world_write_sdf(w, start[0], start[1], world_sdf.c_str()));
      }
      return 0;
    }
    if (*config) {
      Config cfg;
      load(cfg, config_opts);
      check(jist_config_save(cfg.ptr, config_out.c_str()));
      return 0;
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "bench: %s\n", f.message.c_str());
    return exit_code(f.status);
  }
  return kExitOther;
}
