#pragma once

#include <functional>
#include <random>

#include "jist/planning.hpp"

namespace jist {

struct PlannerConfig {
  std::size_t node_budget = 40;
  /// Longest position step of one extension (m).
  double extend_step = 1.5;
  double dt = 0.5;
  /// Half-extent of the sampling square around the robot (m).
  double sample_window = 10.0;
  double goal_tolerance = 0.5;
  std::size_t max_iterations = 400;
  std::uint64_t rng_seed = 0;
  FactorSettings factors;
  GaussNewtonOptions solver;

  void check() const;
};

/// Uniform position in the sampling window (clipped to `bounds`), yaw within
/// pi of the current yaw, zero velocity.
StateVector random_sample(const StateVector& current, const PlannerConfig& cfg, const Bounds& bounds,
                          std::mt19937_64& rng);

/// Closest variable in (x, y); ties go to the smallest id.
VariableId nearest_neighbour(const FactorGraph& graph, const StateVector& q);

/// Step from `near` toward `rand` by at most extend_step. Yaw follows the
/// displacement (unwrapped near the parent yaw); velocities are the
/// displacement over dt.
StateVector extend_state(const StateVector& near, const StateVector& rand, const PlannerConfig& cfg);

/// Leaf with the lowest path cost per edge. Each factor counts toward the
/// deepest of its variables, so a path's cost sums the factors of its nodes.
PlanStep search_best_leaf(const FactorGraph& graph);

/**
 * Joint sampling and trajectory optimization over a tree of hypotheses.
 * Each iteration grows the tree to the node budget, optimizes it, executes
 * the first step toward the best leaf and prunes the branches that step
 * made unreachable.
 */
class JistPlanner final : public Planner {
 public:
  using Sampler = std::function<StateVector(const FactorGraph&, std::mt19937_64&)>;

  JistPlanner(PlannerConfig cfg, RobotShape shape);

  std::string_view name() const override { return "jist"; }
  void reset(const StateVector& start, const StateVector& goal, const Bounds& bounds) override;
  PlanStep plan(std::shared_ptr<const SdfGrid> sdf) override;
  void commit(const PlanStep& step, const StateVector& measured) override;

  double dt() const override { return cfg_.dt; }
  double goal_tolerance() const override { return cfg_.goal_tolerance; }
  std::size_t max_iterations() const override { return cfg_.max_iterations; }

  /// Add nodes until the budget is met. Returns the number added.
  std::size_t grow();
  /// Keep the executed child's subtree and re-anchor it at `measured`.
  void prune_unreachable(const StateVector& measured, VariableId executed_child);

  /// Replace the uniform sampler, e.g. to force chain-shaped growth.
  void set_sampler(Sampler sampler) { sampler_ = std::move(sampler); }

  const PlannerConfig& config() const { return cfg_; }
  const FactorGraph& graph() const { return graph_; }
  FactorGraph& graph() { return graph_; }
  const TrajectoryFactors& factors() const { return *factors_; }
  const SolveReport& last_solve() const { return last_solve_; }

 private:
  PlannerConfig cfg_;
  RobotShape shape_;
  Bounds bounds_;
  std::mt19937_64 rng_;
  FactorGraph graph_;
  std::unique_ptr<TrajectoryFactors> factors_;
  Sampler sampler_;
  SolveReport last_solve_;
};

}  // namespace jist
