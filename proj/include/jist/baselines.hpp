#pragma once

#include <map>
#include <random>

#include "jist/planning.hpp"

namespace jist {

// ---------------------------------------------------------------------------
// OPT: one trajectory chain optimized in receding-horizon fashion.

struct ChainConfig {
  /// Number of states on the chain, including the current state.
  std::size_t horizon = 20;
  double dt = 0.5;
  /// Speed of the straight-line initialization (m/s).
  double nominal_speed = 2.0;
  double goal_tolerance = 0.5;
  std::size_t max_iterations = 400;
  FactorSettings factors;
  GaussNewtonOptions solver;

  void check() const;
};

/// Straight line from `current` toward `goal` at `speed`, stopping at the goal.
std::vector<StateVector> straight_line_chain(const StateVector& current, const StateVector& goal, std::size_t n,
                                             double dt, double speed);

/// Drop the first state, put `measured` in front and append a constant-velocity state.
std::vector<StateVector> shift_chain(const std::vector<StateVector>& chain, const StateVector& measured, double dt);

class OptPlanner final : public Planner {
 public:
  OptPlanner(ChainConfig cfg, RobotShape shape);

  std::string_view name() const override { return "opt"; }
  void reset(const StateVector& start, const StateVector& goal, const Bounds& bounds) override;
  PlanStep plan(std::shared_ptr<const SdfGrid> sdf) override;
  void commit(const PlanStep& step, const StateVector& measured) override;

  double dt() const override { return cfg_.dt; }
  double goal_tolerance() const override { return cfg_.goal_tolerance; }
  std::size_t max_iterations() const override { return cfg_.max_iterations; }

  const ChainConfig& config() const { return cfg_; }
  const std::vector<StateVector>& chain() const { return chain_; }
  void set_chain(std::vector<StateVector> chain);
  const FactorGraph& graph() const { return graph_; }
  const SolveReport& last_solve() const { return last_solve_; }

 private:
  void build_graph();

  ChainConfig cfg_;
  RobotShape shape_;
  std::vector<StateVector> chain_;
  FactorGraph graph_;
  std::unique_ptr<TrajectoryFactors> factors_;
  SolveReport last_solve_;
};

// ---------------------------------------------------------------------------
// SAMP: receding-horizon rewiring random tree over positions.

struct TreeConfig {
  std::size_t node_budget = 200;
  double extend_step = 1.5;
  double sample_window = 10.0;
  double rewire_radius = 3.0;
  double goal_weight = 5.0;
  double collision_check_step = 0.1;
  double dt = 0.5;
  double goal_tolerance = 0.5;
  std::size_t max_iterations = 400;
  /// Sampling attempts per iteration, as a multiple of node_budget.
  std::size_t attempt_factor = 20;
  std::uint64_t rng_seed = 0;
  /// Supplies qc, obstacle sigma and eps, n_interp and the speed limit.
  FactorSettings factors;

  void check() const;
};

/// True iff points at most `step` apart along a->b all keep SDF distance
/// minus `radius` above zero. Unobserved space counts as free.
bool collision_free_edge(const Vec2& a, const Vec2& b, const SdfGrid& sdf, double radius, double step);
bool collision_free_edge(const Vec2& a, const Vec2& b, const SdfGrid& sdf, const RobotShape& shape, double step);

/// [x, y, vx, vy] per waypoint: velocity toward the next waypoint, zero at the end.
std::vector<StateVector> fit_velocities(const std::vector<Vec2>& path, double dt);

/// Position tree with stable ids, rooted at the robot.
class PositionTree {
 public:
  struct Node {
    Vec2 position;
    std::optional<VariableId> parent;
    std::vector<VariableId> children;
  };

  VariableId reset(const Vec2& root);
  VariableId add(VariableId parent, const Vec2& position);
  /// Re-parent `id`; throws if that would create a cycle.
  void set_parent(VariableId id, VariableId parent);
  /// Remove `id` and its descendants. Returns the number removed.
  std::size_t remove_subtree(VariableId id);
  /// Keep `id` and its descendants, making `id` the root.
  void keep_subtree(VariableId id);

  VariableId root() const { return root_; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(VariableId id) const { return nodes_.count(id) != 0; }
  const Node& node(VariableId id) const;
  const Vec2& position(VariableId id) const { return node(id).position; }
  void set_position(VariableId id, const Vec2& p);
  bool is_ancestor(VariableId ancestor, VariableId id) const;
  std::vector<VariableId> path_to(VariableId id) const;
  std::vector<Vec2> path_positions(VariableId id) const;
  std::vector<VariableId> ids() const;
  VariableId nearest(const Vec2& p) const;

 private:
  Node& mut(VariableId id);

  std::map<VariableId, Node> nodes_;
  VariableId root_ = 0;
  VariableId next_ = 0;
};

struct SampCostModel {
  GpParams gp;
  double obstacle_eps = 1.0;
  double sigma_obstacle = 0.05;
  int n_interp = 3;
  double radius = 0.0;
  double goal_weight = 1.0;
  Vec2 goal{0.0, 0.0};

  /// Cache Q^-1 and the interpolation matrices; call after changing gp or n_interp.
  void prepare();
  /// GP smoothness plus hinge obstacle cost along `path` (root excluded).
  double path_cost(const std::vector<Vec2>& path, const SdfGrid* sdf) const;

 private:
  Eigen::MatrixXd qinv_;
  std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> interp_;
};

/// Path cost of `node` plus goal_weight times its distance to the goal.
double samp_path_cost(const PositionTree& tree, VariableId node, const SampCostModel& model, const SdfGrid* sdf);

class SampPlanner final : public Planner {
 public:
  SampPlanner(TreeConfig cfg, RobotShape shape);

  std::string_view name() const override { return "samp"; }
  void reset(const StateVector& start, const StateVector& goal, const Bounds& bounds) override;
  PlanStep plan(std::shared_ptr<const SdfGrid> sdf) override;
  void commit(const PlanStep& step, const StateVector& measured) override;

  double dt() const override { return cfg_.dt; }
  double goal_tolerance() const override { return cfg_.goal_tolerance; }
  std::size_t max_iterations() const override { return cfg_.max_iterations; }

  /// Drop nodes and edges that collide in `sdf`. Returns the number removed.
  std::size_t prune_invalid(const SdfGrid& sdf);
  /// Sample, connect and rewire until the budget or the attempt cap is hit.
  std::size_t grow(const SdfGrid& sdf);
  /// Non-root node minimizing samp_path_cost (the root if it is alone).
  VariableId best_node(const SdfGrid* sdf) const;

  const TreeConfig& config() const { return cfg_; }
  const PositionTree& tree() const { return tree_; }
  PositionTree& tree() { return tree_; }
  const SampCostModel& cost_model() const { return model_; }
  /// Re-parent neighbours within rewire_radius under `id` when that lowers
  /// their path cost. Returns true if any parent changed.
  bool rewire_through(VariableId id, const SdfGrid& sdf);

 private:
  bool node_free(const Vec2& p, const SdfGrid& sdf) const;
  bool edge_ok(const Vec2& a, const Vec2& b, const SdfGrid& sdf) const;
  double cost_to(VariableId id, const SdfGrid* sdf) const;

  TreeConfig cfg_;
  RobotShape shape_;
  double radius_;
  Bounds bounds_;
  std::mt19937_64 rng_;
  PositionTree tree_;
  SampCostModel model_;
  double root_yaw_ = 0.0;
};

}  // namespace jist
