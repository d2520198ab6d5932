#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jist/baselines.hpp"
#include "jist/jist_planner.hpp"

namespace jist {

enum class PlannerKind { jist, opt, samp };
const char* to_string(PlannerKind kind);
PlannerKind planner_kind_from_string(const std::string& name);

enum class AblationAxis { none, obstacles, speed, noise, budget };
const char* to_string(AblationAxis axis);
AblationAxis axis_from_string(const std::string& name);

struct BenchmarkConfig {
  EnvConfig env;
  /// Shared by all three planners.
  FactorSettings factors;
  PlannerConfig jist;
  ChainConfig opt;
  TreeConfig samp;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  std::vector<PlannerKind> planners{PlannerKind::jist, PlannerKind::opt, PlannerKind::samp};
  AblationAxis axis = AblationAxis::none;
  std::vector<double> values;

  void check() const;
};

/// Shipped defaults for an environment.
BenchmarkConfig default_benchmark(EnvKind kind);

/// Copy of `cfg` with one ablation axis set to `value`.
BenchmarkConfig with_axis(const BenchmarkConfig& cfg, AblationAxis axis, double value);

std::string config_to_json(const BenchmarkConfig& cfg);
/// Missing keys keep the defaults of the named environment (or forest).
BenchmarkConfig config_from_json(const std::string& text);
BenchmarkConfig load_config(const std::filesystem::path& path);
void save_config(const BenchmarkConfig& cfg, const std::filesystem::path& path);
/// Set a dotted key such as "jist.node_budget" or "env.world_size" from text.
void set_param(BenchmarkConfig& cfg, const std::string& key, const std::string& value);

struct TrialResult {
  PlannerKind planner = PlannerKind::jist;
  std::uint64_t seed = 0;
  Outcome outcome = Outcome::timeout;
  double execution_time = 0.0;
  double mean_compute = 0.0;
  std::optional<double> normalized_distance;
  std::size_t iterations = 0;
  /// Hash of the scenario and the initial obstacle frame.
  std::uint64_t world_hash = 0;
  std::vector<double> compute_seconds;
  std::string error;
};

struct TrialOptions {
  std::ostream* trace = nullptr;
  std::function<void(const IterationRecord&)> observer;
  /// Receives the world after the episode.
  std::function<void(const World&)> on_finish;
};

std::unique_ptr<Planner> make_planner(PlannerKind kind, const BenchmarkConfig& cfg, std::uint64_t seed);

TrialResult run_trial(PlannerKind kind, const BenchmarkConfig& cfg, std::uint64_t seed,
                      const TrialOptions& options = {});
/// Run against recorded obstacle footprints instead of simulated dynamics.
TrialResult run_replay_trial(PlannerKind kind, const BenchmarkConfig& cfg, const WorldScript& script,
                             std::uint64_t seed, const TrialOptions& options = {});

struct MetricsRow {
  PlannerKind planner = PlannerKind::jist;
  std::optional<double> axis_value;
  double success = 0.0;
  std::optional<double> exec_time;
  double compute_time = 0.0;
  std::optional<double> norm_dist;
  std::size_t n_trials = 0;
};
using MetricsTable = std::vector<MetricsRow>;

MetricsRow aggregate(PlannerKind planner, std::optional<double> axis_value, const std::vector<TrialResult>& trials);

struct BenchmarkOptions {
  /// When set, one trace file per trial is written here.
  std::optional<std::filesystem::path> trace_dir;
  std::function<void(const TrialResult&)> on_trial;
};

/// Every planner faces the same seeds base, base+1, ...; rows are sorted by
/// planner name, then axis value.
MetricsTable run_benchmark(const BenchmarkConfig& cfg, const BenchmarkOptions& options = {});

void write_csv(const MetricsTable& table, std::ostream& os);
void write_csv(const MetricsTable& table, const std::filesystem::path& path);

}  // namespace jist
