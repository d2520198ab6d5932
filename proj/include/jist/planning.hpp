#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jist/factors.hpp"
#include "jist/simworld.hpp"

namespace jist {

/// Noise and limit settings shared by every planner that builds factor graphs.
struct FactorSettings {
  /// Q_c diagonal for [x, y, yaw].
  Eigen::VectorXd qc = Eigen::VectorXd::Constant(planar::kDof, 1.0);
  double sigma_current = 1e-3;
  double sigma_obstacle = 0.05;
  /// Hinge safety distance beyond the robot radius.
  double obstacle_eps = 1.0;
  int n_interp = 3;
  double sigma_goal = 10.0;
  double sigma_limit = 0.1;
  double limit_eps = 0.0;
  LimitMode limit_mode = LimitMode::verbatim;
  /// Per-component translational velocity limit (m/s).
  double max_speed = 3.0;
  /// Yaw rate limit (rad/s).
  double max_yaw_rate = 0.6;
  double sigma_nonholonomic = 0.1;

  void check() const;
  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
};

/**
 * Creates and attaches the per-state and per-edge factors of a trajectory
 * graph. Factor instances are shared between variables: the obstacle factors
 * read the SDF through one context and all goal factors share one noise model.
 */
class TrajectoryFactors {
 public:
  TrajectoryFactors(FactorSettings settings, RobotShape shape, double dt, StateVector start, StateVector goal);

  const FactorSettings& settings() const { return settings_; }
  const GpParams& gp() const { return gp_; }
  const StateVector& start() const { return start_; }
  const StateVector& goal() const { return goal_; }

  void set_sdf(std::shared_ptr<const SdfGrid> sdf);
  /// Rescale every goal factor's covariance for the robot at `current`.
  void update_goal_noise(const StateVector& current);

  /// Unary factors on a non-root state: obstacle, goal, limit, non-holonomic.
  void attach_node(FactorGraph& graph, VariableId id) const;
  /// GP prior and interpolated obstacle factors on the edge, plus attach_node(child).
  void attach_edge(FactorGraph& graph, VariableId parent, VariableId child) const;
  std::size_t factors_per_edge() const { return static_cast<std::size_t>(settings_.n_interp) + 5; }

  /// Make the root carry only the current-state factor among unary factors,
  /// targeted at `measured`.
  void anchor_root(FactorGraph& graph, const StateVector& measured);

  std::uint64_t unknown_queries() const { return ctx_->unknown_queries.load(); }

 private:
  FactorSettings settings_;
  GpParams gp_;
  StateVector start_;
  StateVector goal_;
  std::shared_ptr<ObstacleContext> ctx_;
  std::shared_ptr<GpPriorFactor> gp_factor_;
  std::shared_ptr<ObstacleFactor> obstacle_;
  std::vector<std::shared_ptr<InterpObstacleFactor>> interp_;
  std::shared_ptr<GoalFactor> goal_factor_;
  std::shared_ptr<CurrentStateFactor> current_;
  std::shared_ptr<LimitFactor> limit_;
  std::shared_ptr<NonholonomicFactor> nonholonomic_;
};

struct PlanStep {
  /// Commanded state, one dt ahead of the current state.
  StateVector next_state;
  VariableId best_leaf = 0;
  /// Root to leaf.
  std::vector<VariableId> best_path;
  std::vector<StateVector> path_states;
  double normalized_cost = 0.0;
  double compute_seconds = 0.0;
  std::size_t graph_size = 0;
};

/// Receding-horizon planner driven by run_episode.
class Planner {
 public:
  virtual ~Planner() = default;

  virtual std::string_view name() const = 0;
  virtual void reset(const StateVector& start, const StateVector& goal, const Bounds& bounds) = 0;
  /// One planning iteration given the latest SDF observation.
  virtual PlanStep plan(std::shared_ptr<const SdfGrid> sdf) = 0;
  /// Called after the step was executed and the new state measured.
  virtual void commit(const PlanStep& step, const StateVector& measured) = 0;

  virtual double dt() const = 0;
  virtual double goal_tolerance() const = 0;
  virtual std::size_t max_iterations() const = 0;
};

enum class Outcome { success, collision, timeout, failure };
const char* to_string(Outcome outcome);

struct IterationRecord {
  std::size_t iteration = 0;
  double time = 0.0;
  StateVector root;
  PlanStep step;
};

struct EpisodeResult {
  Outcome outcome = Outcome::timeout;
  std::size_t iterations = 0;
  double execution_time = 0.0;
  double path_length = 0.0;
  double initial_distance = 0.0;
  std::optional<double> normalized_distance;
  std::vector<double> compute_seconds;
  double mean_compute() const;
  /// Set when a planner error ended the episode.
  std::string error;
};

struct EpisodeOptions {
  /// One line per iteration: index, root state, leaf depth, normalized cost,
  /// graph size, compute seconds.
  std::ostream* trace = nullptr;
  /// Called after each planning step, before execution.
  std::function<void(const IterationRecord&)> observer;
};

EpisodeResult run_episode(World& world, Planner& planner, const StateVector& start, const StateVector& goal,
                          const EpisodeOptions& options = {});

void write_trace_line(std::ostream& os, const IterationRecord& rec);

}  // namespace jist
