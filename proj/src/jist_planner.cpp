#include "jist/jist_planner.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

namespace jist {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void PlannerConfig::check() const {
  if (node_budget < 2) throw Error(ErrorCode::config, "node_budget must be >= 2");
  if (!(extend_step > 0.0)) throw Error(ErrorCode::config, "extend_step must be positive");
  if (!(dt > 0.0)) throw Error(ErrorCode::config, "dt must be positive");
  if (sample_window < 0.0) throw Error(ErrorCode::config, "sample_window must be >= 0");
  if (!(goal_tolerance > 0.0)) throw Error(ErrorCode::config, "goal_tolerance must be positive");
  factors.check();
}

StateVector random_sample(const StateVector& current, const PlannerConfig& cfg, const Bounds& bounds,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double dx = unit(rng) * cfg.sample_window;
  const double dy = unit(rng) * cfg.sample_window;
  const double dyaw = unit(rng) * kPi;
  Vec2 p = planar::position(current) + Vec2(dx, dy);
  if (bounds.max.x() > bounds.min.x() && bounds.max.y() > bounds.min.y()) p = bounds.clamp(p);
  return planar::make_state(p.x(), p.y(), current[planar::kYaw] + dyaw);
}

VariableId nearest_neighbour(const FactorGraph& graph, const StateVector& q) {
  if (graph.empty()) throw Error(ErrorCode::invalid_argument, "nearest neighbour of an empty graph");
  const Vec2 target = planar::position(q);
  VariableId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  // variable_ids() is ascending, so strict comparison keeps the smallest id on ties.
  for (VariableId id : graph.variable_ids()) {
    const double d = (planar::position(graph.value(id)) - target).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

StateVector extend_state(const StateVector& near, const StateVector& rand, const PlannerConfig& cfg) {
  const Vec2 from = planar::position(near);
  const Vec2 delta = planar::position(rand) - from;
  const double dist = delta.norm();
  const Vec2 step = dist > cfg.extend_step ? Vec2(delta * (cfg.extend_step / dist)) : delta;
  const Vec2 to = from + step;
  double yaw = near[planar::kYaw];
  if (step.squaredNorm() > 0.0) yaw = unwrap_near(std::atan2(step.y(), step.x()), near[planar::kYaw]);
  const Vec2 v = step / cfg.dt;
  return planar::make_state(to.x(), to.y(), yaw, v.x(), v.y(), (yaw - near[planar::kYaw]) / cfg.dt);
}

PlanStep search_best_leaf(const FactorGraph& graph) {
  if (graph.empty()) throw Error(ErrorCode::invalid_argument, "search on an empty graph");
  const VariableId root = graph.root();
  if (graph.children(root).empty()) throw Error(ErrorCode::invalid_argument, "root has no children");

  std::unordered_map<VariableId, double> own;
  for (const auto& [fid, entry] : graph.factors()) {
    VariableId deepest = entry.vars.front();
    for (VariableId v : entry.vars) {
      if (graph.depth(v) > graph.depth(deepest)) deepest = v;
    }
    own[deepest] += graph.factor_cost(fid);
  }

  std::unordered_map<VariableId, double> path_cost;
  std::deque<VariableId> queue{root};
  path_cost[root] = own[root];
  PlanStep step;
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  while (!queue.empty()) {
    const VariableId id = queue.front();
    queue.pop_front();
    const auto& kids = graph.children(id);
    if (kids.empty()) {
      const double score = path_cost[id] / static_cast<double>(graph.depth(id));
      if (score < best || (score == best && found && id < step.best_leaf)) {
        best = score;
        step.best_leaf = id;
        found = true;
      }
      continue;
    }
    for (VariableId c : kids) {
      path_cost[c] = path_cost[id] + own[c];
      queue.push_back(c);
    }
  }
  step.normalized_cost = best;
  step.best_path = graph.path_to(step.best_leaf);
  step.path_states.reserve(step.best_path.size());
  for (VariableId v : step.best_path) step.path_states.push_back(graph.value(v));
  step.next_state = graph.value(step.best_path[1]);
  step.graph_size = graph.size();
  return step;
}

// ---------------------------------------------------------------------------

JistPlanner::JistPlanner(PlannerConfig cfg, RobotShape shape) : cfg_(std::move(cfg)), shape_(std::move(shape)) {
  cfg_.check();
}

void JistPlanner::reset(const StateVector& start, const StateVector& goal, const Bounds& bounds) {
  bounds_ = bounds;
  rng_.seed(cfg_.rng_seed);
  graph_ = FactorGraph();
  graph_.add_variable(std::nullopt, start);
  factors_ = std::make_unique<TrajectoryFactors>(cfg_.factors, shape_, cfg_.dt, start, goal);
  factors_->anchor_root(graph_, start);
  last_solve_ = {};
}

std::size_t JistPlanner::grow() {
  if (!factors_) throw Error(ErrorCode::invalid_argument, "planner used before reset");
  std::size_t added = 0;
  const StateVector current = graph_.value(graph_.root());
  while (graph_.size() < cfg_.node_budget) {
    const StateVector rand = sampler_ ? sampler_(graph_, rng_) : random_sample(current, cfg_, bounds_, rng_);
    const VariableId near = nearest_neighbour(graph_, rand);
    const VariableId id = graph_.add_variable(near, extend_state(graph_.value(near), rand, cfg_));
    factors_->attach_edge(graph_, near, id);
    ++added;
  }
  return added;
}

PlanStep JistPlanner::plan(std::shared_ptr<const SdfGrid> sdf) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!factors_) throw Error(ErrorCode::invalid_argument, "planner used before reset");
  factors_->set_sdf(std::move(sdf));
  grow();
  last_solve_ = gauss_newton(graph_, cfg_.solver);
  PlanStep step = search_best_leaf(graph_);
  step.compute_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return step;
}

void JistPlanner::prune_unreachable(const StateVector& measured, VariableId executed_child) {
  if (!graph_.contains(executed_child) || graph_.parent(executed_child) != graph_.root()) {
    throw Error(ErrorCode::invalid_argument, "executed state is not a child of the root");
  }
  graph_.remove_all_except_subtree(executed_child);
  factors_->anchor_root(graph_, measured);
  factors_->update_goal_noise(measured);
}

void JistPlanner::commit(const PlanStep& step, const StateVector& measured) {
  if (step.best_path.size() < 2) throw Error(ErrorCode::invalid_argument, "plan step has no executable edge");
  prune_unreachable(measured, step.best_path[1]);
}

}  // namespace jist
