#include "jist/baselines.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

namespace jist {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// OPT

void ChainConfig::check() const {
  if (horizon < 2) throw Error(ErrorCode::config, "horizon must be >= 2");
  if (!(dt > 0.0)) throw Error(ErrorCode::config, "dt must be positive");
  if (!(nominal_speed > 0.0)) throw Error(ErrorCode::config, "nominal speed must be positive");
  if (!(goal_tolerance > 0.0)) throw Error(ErrorCode::config, "goal_tolerance must be positive");
  factors.check();
}

std::vector<StateVector> straight_line_chain(const StateVector& current, const StateVector& goal, std::size_t n,
                                             double dt, double speed) {
  const Vec2 p0 = planar::position(current);
  const Vec2 d = planar::position(goal) - p0;
  const double dist = d.norm();
  const Vec2 dir = dist > 0.0 ? Vec2(d / dist) : Vec2::Zero();
  const double yaw = dist > 0.0 ? unwrap_near(std::atan2(d.y(), d.x()), current[planar::kYaw]) : current[planar::kYaw];
  std::vector<StateVector> chain;
  chain.reserve(n);
  chain.push_back(current);
  for (std::size_t k = 1; k < n; ++k) {
    const double s = speed * dt * static_cast<double>(k);
    const bool arrived = s >= dist;
    const Vec2 p = p0 + dir * std::min(s, dist);
    const Vec2 v = arrived ? Vec2::Zero() : Vec2(dir * speed);
    chain.push_back(planar::make_state(p.x(), p.y(), yaw, v.x(), v.y(), 0.0));
  }
  return chain;
}

std::vector<StateVector> shift_chain(const std::vector<StateVector>& chain, const StateVector& measured, double dt) {
  if (chain.size() < 2) throw Error(ErrorCode::invalid_argument, "chain needs at least two states");
  std::vector<StateVector> out(chain.begin() + 1, chain.end());
  out.front() = measured;
  StateVector tail = chain.back();
  tail.head<planar::kDof>() += dt * tail.tail<planar::kDof>();
  out.push_back(std::move(tail));
  return out;
}

OptPlanner::OptPlanner(ChainConfig cfg, RobotShape shape) : cfg_(std::move(cfg)), shape_(std::move(shape)) {
  cfg_.check();
}

void OptPlanner::reset(const StateVector& start, const StateVector& goal, const Bounds&) {
  factors_ = std::make_unique<TrajectoryFactors>(cfg_.factors, shape_, cfg_.dt, start, goal);
  chain_ = straight_line_chain(start, goal, cfg_.horizon, cfg_.dt, cfg_.nominal_speed);
  last_solve_ = {};
}

void OptPlanner::set_chain(std::vector<StateVector> chain) {
  if (chain.size() != cfg_.horizon) throw Error(ErrorCode::dimension_mismatch, "chain length must equal horizon");
  chain_ = std::move(chain);
}

void OptPlanner::build_graph() {
  graph_ = FactorGraph();
  VariableId prev = graph_.add_variable(std::nullopt, chain_.front());
  factors_->anchor_root(graph_, chain_.front());
  factors_->update_goal_noise(chain_.front());
  for (std::size_t k = 1; k < chain_.size(); ++k) {
    const VariableId id = graph_.add_variable(prev, chain_[k]);
    factors_->attach_edge(graph_, prev, id);
    prev = id;
  }
}

PlanStep OptPlanner::plan(std::shared_ptr<const SdfGrid> sdf) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!factors_) throw Error(ErrorCode::invalid_argument, "planner used before reset");
  factors_->set_sdf(std::move(sdf));
  build_graph();
  last_solve_ = gauss_newton(graph_, cfg_.solver);
  PlanStep step;
  for (VariableId id = graph_.root();; id = graph_.children(id).front()) {
    step.best_path.push_back(id);
    step.path_states.push_back(graph_.value(id));
    if (graph_.children(id).empty()) break;
  }
  chain_ = step.path_states;
  step.best_leaf = step.best_path.back();
  step.next_state = step.path_states[1];
  step.normalized_cost = graph_.total_cost() / static_cast<double>(step.best_path.size() - 1);
  step.graph_size = graph_.size();
  step.compute_seconds = seconds_since(t0);
  return step;
}

void OptPlanner::commit(const PlanStep&, const StateVector& measured) { chain_ = shift_chain(chain_, measured, cfg_.dt); }

// ---------------------------------------------------------------------------
// SAMP geometry and cost

void TreeConfig::check() const {
  if (node_budget < 2) throw Error(ErrorCode::config, "node_budget must be >= 2");
  if (!(extend_step > 0.0)) throw Error(ErrorCode::config, "extend_step must be positive");
  if (rewire_radius < extend_step) throw Error(ErrorCode::config, "rewire_radius must be >= extend_step");
  if (!(goal_weight > 0.0)) throw Error(ErrorCode::config, "goal_weight must be positive");
  if (!(collision_check_step > 0.0)) throw Error(ErrorCode::config, "collision_check_step must be positive");
  if (!(dt > 0.0)) throw Error(ErrorCode::config, "dt must be positive");
  if (sample_window < 0.0) throw Error(ErrorCode::config, "sample_window must be >= 0");
  if (!(goal_tolerance > 0.0)) throw Error(ErrorCode::config, "goal_tolerance must be positive");
  if (attempt_factor < 1) throw Error(ErrorCode::config, "attempt_factor must be >= 1");
  factors.check();
}

bool collision_free_edge(const Vec2& a, const Vec2& b, const SdfGrid& sdf, double radius, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::invalid_argument, "collision check step must be positive");
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / step)));
  for (int i = 0; i <= n; ++i) {
    const Vec2 p = a + (b - a) * (static_cast<double>(i) / n);
    const auto s = sdf.query(p);
    if (s && s->distance - radius <= 0.0) return false;
  }
  return true;
}

bool collision_free_edge(const Vec2& a, const Vec2& b, const SdfGrid& sdf, const RobotShape& shape, double step) {
  return collision_free_edge(a, b, sdf, shape.bounding_radius(), step);
}

std::vector<StateVector> fit_velocities(const std::vector<Vec2>& path, double dt) {
  if (path.size() < 2) throw Error(ErrorCode::invalid_argument, "velocity fit needs at least two waypoints");
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "dt must be positive");
  std::vector<StateVector> out;
  out.reserve(path.size());
  for (std::size_t k = 0; k < path.size(); ++k) {
    StateVector s = StateVector::Zero(4);
    s.head<2>() = path[k];
    if (k + 1 < path.size()) s.tail<2>() = (path[k + 1] - path[k]) / dt;
    out.push_back(std::move(s));
  }
  return out;
}

void SampCostModel::prepare() {
  gp.check();
  qinv_ = gp_q_inverse(gp.qc, gp.dt);
  interp_.clear();
  for (int i = 1; i <= n_interp; ++i) interp_.push_back(gp_interpolation_matrices(gp, gp.dt * i / (n_interp + 1)));
}

double SampCostModel::path_cost(const std::vector<Vec2>& path, const SdfGrid* sdf) const {
  if (path.size() < 2) return 0.0;
  if (qinv_.size() == 0 || static_cast<int>(interp_.size()) != n_interp) {
    SampCostModel prepared = *this;
    prepared.prepare();
    return prepared.path_cost(path, sdf);
  }
  const auto states = fit_velocities(path, gp.dt);
  const Eigen::MatrixXd& qinv = qinv_;
  const auto& interp = interp_;
  const double w_obs = 0.5 / (sigma_obstacle * sigma_obstacle);
  auto obstacle_at = [&](const Vec2& p) {
    if (!sdf) return 0.0;
    const auto s = sdf->query(p);
    if (!s) return 0.0;
    const double c = hinge_cost(s->distance - radius, obstacle_eps);
    return w_obs * c * c;
  };
  double cost = 0.0;
  for (std::size_t k = 0; k + 1 < states.size(); ++k) {
    const Residual r = gp_prior_residual(states[k], states[k + 1], gp);
    cost += 0.5 * r.value.dot(qinv * r.value);
    for (const auto& [lambda, psi] : interp) {
      const StateVector mid = lambda * states[k] + psi * states[k + 1];
      cost += obstacle_at(mid.head<2>());
    }
    cost += obstacle_at(path[k + 1]);
  }
  return cost;
}

double samp_path_cost(const PositionTree& tree, VariableId node, const SampCostModel& model, const SdfGrid* sdf) {
  return model.path_cost(tree.path_positions(node), sdf) + model.goal_weight * (tree.position(node) - model.goal).norm();
}

// ---------------------------------------------------------------------------
// PositionTree

VariableId PositionTree::reset(const Vec2& root) {
  nodes_.clear();
  root_ = next_++;
  nodes_[root_] = Node{root, std::nullopt, {}};
  return root_;
}

const PositionTree::Node& PositionTree::node(VariableId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(ErrorCode::unknown_variable, "unknown tree node " + std::to_string(id));
  return it->second;
}

PositionTree::Node& PositionTree::mut(VariableId id) { return const_cast<Node&>(node(id)); }

VariableId PositionTree::add(VariableId parent, const Vec2& position) {
  mut(parent).children.push_back(next_);
  nodes_[next_] = Node{position, parent, {}};
  return next_++;
}

bool PositionTree::is_ancestor(VariableId ancestor, VariableId id) const {
  for (std::optional<VariableId> cur = id; cur; cur = node(*cur).parent) {
    if (*cur == ancestor) return true;
  }
  return false;
}

void PositionTree::set_parent(VariableId id, VariableId parent) {
  if (id == root_) throw Error(ErrorCode::invalid_argument, "cannot re-parent the root");
  if (is_ancestor(id, parent)) throw Error(ErrorCode::invalid_argument, "re-parenting would create a cycle");
  Node& n = mut(id);
  auto& siblings = mut(*n.parent).children;
  siblings.erase(std::find(siblings.begin(), siblings.end(), id));
  n.parent = parent;
  mut(parent).children.push_back(id);
}

std::size_t PositionTree::remove_subtree(VariableId id) {
  if (id == root_) throw Error(ErrorCode::invalid_argument, "cannot remove the root");
  Node& n = mut(id);
  auto& siblings = mut(*n.parent).children;
  siblings.erase(std::find(siblings.begin(), siblings.end(), id));
  std::size_t removed = 0;
  std::vector<VariableId> stack{id};
  while (!stack.empty()) {
    const VariableId cur = stack.back();
    stack.pop_back();
    const auto& kids = node(cur).children;
    stack.insert(stack.end(), kids.begin(), kids.end());
    nodes_.erase(cur);
    ++removed;
  }
  return removed;
}

void PositionTree::keep_subtree(VariableId id) {
  if (id == root_) return;
  std::map<VariableId, Node> kept;
  std::vector<VariableId> stack{id};
  while (!stack.empty()) {
    const VariableId cur = stack.back();
    stack.pop_back();
    const Node& n = node(cur);
    stack.insert(stack.end(), n.children.begin(), n.children.end());
    kept[cur] = n;
  }
  kept[id].parent.reset();
  nodes_ = std::move(kept);
  root_ = id;
}

void PositionTree::set_position(VariableId id, const Vec2& p) { mut(id).position = p; }

std::vector<VariableId> PositionTree::path_to(VariableId id) const {
  std::vector<VariableId> path;
  for (std::optional<VariableId> cur = id; cur; cur = node(*cur).parent) path.push_back(*cur);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<Vec2> PositionTree::path_positions(VariableId id) const {
  std::vector<Vec2> out;
  for (VariableId v : path_to(id)) out.push_back(position(v));
  return out;
}

std::vector<VariableId> PositionTree::ids() const {
  std::vector<VariableId> out;
  out.reserve(nodes_.size());
  for (const auto& [id, n] : nodes_) out.push_back(id);
  return out;
}

VariableId PositionTree::nearest(const Vec2& p) const {
  VariableId best = root_;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [id, n] : nodes_) {
    const double d = (n.position - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// SAMP

SampPlanner::SampPlanner(TreeConfig cfg, RobotShape shape)
    : cfg_(std::move(cfg)), shape_(std::move(shape)), radius_(shape_.bounding_radius()) {
  cfg_.check();
}

void SampPlanner::reset(const StateVector& start, const StateVector& goal, const Bounds& bounds) {
  bounds_ = bounds;
  rng_.seed(cfg_.rng_seed);
  tree_.reset(planar::position(start));
  root_yaw_ = start[planar::kYaw];
  model_.gp.qc = cfg_.factors.qc.head<2>();
  model_.gp.dt = cfg_.dt;
  model_.obstacle_eps = cfg_.factors.obstacle_eps;
  model_.sigma_obstacle = cfg_.factors.sigma_obstacle;
  model_.n_interp = cfg_.factors.n_interp;
  model_.radius = radius_;
  model_.goal_weight = cfg_.goal_weight;
  model_.goal = planar::position(goal);
  model_.prepare();
}

bool SampPlanner::node_free(const Vec2& p, const SdfGrid& sdf) const {
  const auto s = sdf.query(p);
  return !s || s->distance - radius_ > 0.0;
}

bool SampPlanner::edge_ok(const Vec2& a, const Vec2& b, const SdfGrid& sdf) const {
  // Fitted speed along one edge may not exceed the translational limit.
  if ((b - a).norm() > cfg_.factors.max_speed * cfg_.dt + 1e-12) return false;
  return collision_free_edge(a, b, sdf, radius_, cfg_.collision_check_step);
}

double SampPlanner::cost_to(VariableId id, const SdfGrid* sdf) const {
  return model_.path_cost(tree_.path_positions(id), sdf);
}

std::size_t SampPlanner::prune_invalid(const SdfGrid& sdf) {
  std::size_t removed = 0;
  std::deque<VariableId> queue{tree_.root()};
  while (!queue.empty()) {
    const VariableId id = queue.front();
    queue.pop_front();
    const std::vector<VariableId> kids = tree_.node(id).children;
    for (VariableId c : kids) {
      if (!node_free(tree_.position(c), sdf) ||
          !collision_free_edge(tree_.position(id), tree_.position(c), sdf, radius_, cfg_.collision_check_step)) {
        removed += tree_.remove_subtree(c);
      } else {
        queue.push_back(c);
      }
    }
  }
  return removed;
}

bool SampPlanner::rewire_through(VariableId id, const SdfGrid& sdf) {
  bool changed = false;
  const Vec2 p = tree_.position(id);
  const std::vector<Vec2> base = tree_.path_positions(id);
  for (VariableId other : tree_.ids()) {
    if (other == id || other == tree_.root() || tree_.node(id).parent == other) continue;
    const Vec2 q = tree_.position(other);
    if ((q - p).norm() > cfg_.rewire_radius || tree_.is_ancestor(other, id)) continue;
    if (!edge_ok(p, q, sdf)) continue;
    std::vector<Vec2> via = base;
    via.push_back(q);
    if (model_.path_cost(via, &sdf) < cost_to(other, &sdf)) {
      tree_.set_parent(other, id);
      changed = true;
    }
  }
  return changed;
}

std::size_t SampPlanner::grow(const SdfGrid& sdf) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Vec2 center = tree_.position(tree_.root());
  const std::size_t max_attempts = cfg_.attempt_factor * cfg_.node_budget;
  std::size_t added = 0;
  for (std::size_t attempt = 0; attempt < max_attempts && tree_.size() < cfg_.node_budget; ++attempt) {
    const double dx = unit(rng_) * cfg_.sample_window;
    const double dy = unit(rng_) * cfg_.sample_window;
    Vec2 q = center + Vec2(dx, dy);
    if (bounds_.max.x() > bounds_.min.x()) q = bounds_.clamp(q);
    const VariableId near = tree_.nearest(q);
    const Vec2 from = tree_.position(near);
    const Vec2 d = q - from;
    const double len = d.norm();
    if (len == 0.0) continue;
    const Vec2 p = len > cfg_.extend_step ? Vec2(from + d * (cfg_.extend_step / len)) : q;
    if (!node_free(p, sdf)) continue;

    // Cheapest collision-free parent within the rewire radius.
    std::optional<VariableId> parent;
    double best = std::numeric_limits<double>::infinity();
    for (VariableId cand : tree_.ids()) {
      const Vec2 c = tree_.position(cand);
      if ((c - p).norm() > cfg_.rewire_radius || !edge_ok(c, p, sdf)) continue;
      std::vector<Vec2> path = tree_.path_positions(cand);
      path.push_back(p);
      const double cost = model_.path_cost(path, &sdf);
      if (cost < best) {
        best = cost;
        parent = cand;
      }
    }
    if (!parent) continue;
    const VariableId id = tree_.add(*parent, p);
    ++added;
    rewire_through(id, sdf);
  }
  return added;
}

VariableId SampPlanner::best_node(const SdfGrid* sdf) const {
  // The root is only returned when the tree has nothing else; a branch
  // always wins over standing still.
  VariableId best = tree_.root();
  double best_cost = std::numeric_limits<double>::infinity();
  for (VariableId id : tree_.ids()) {
    if (id == tree_.root()) continue;
    const double c = samp_path_cost(tree_, id, model_, sdf);
    if (c < best_cost) {
      best_cost = c;
      best = id;
    }
  }
  return best;
}

PlanStep SampPlanner::plan(std::shared_ptr<const SdfGrid> sdf) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!sdf) throw Error(ErrorCode::invalid_argument, "SAMP needs an SDF");
  prune_invalid(*sdf);
  grow(*sdf);

  PlanStep step;
  step.best_leaf = best_node(sdf.get());
  step.best_path = tree_.path_to(step.best_leaf);
  step.graph_size = tree_.size();
  const Vec2 root = tree_.position(tree_.root());
  if (step.best_path.size() < 2) {
    // Stay in place.
    step.best_path = {tree_.root()};
    step.next_state = planar::make_state(root.x(), root.y(), root_yaw_);
    step.path_states = {step.next_state};
    step.normalized_cost = samp_path_cost(tree_, tree_.root(), model_, sdf.get());
  } else {
    const std::vector<Vec2> path = tree_.path_positions(step.best_leaf);
    step.path_states.push_back(planar::make_state(root.x(), root.y(), root_yaw_));
    double yaw = root_yaw_;
    // Each state moves with the average velocity of the edge leading into it.
    for (std::size_t k = 1; k < path.size(); ++k) {
      const Vec2 v = (path[k] - path[k - 1]) / cfg_.dt;
      const double prev = yaw;
      if (v.squaredNorm() > 0.0) yaw = unwrap_near(std::atan2(v.y(), v.x()), yaw);
      step.path_states.push_back(planar::make_state(path[k].x(), path[k].y(), yaw, v.x(), v.y(), (yaw - prev) / cfg_.dt));
    }
    step.next_state = step.path_states[1];
    step.normalized_cost =
        samp_path_cost(tree_, step.best_leaf, model_, sdf.get()) / static_cast<double>(step.best_path.size() - 1);
  }
  step.compute_seconds = seconds_since(t0);
  return step;
}

void SampPlanner::commit(const PlanStep&, const StateVector& measured) {
  const Vec2 p = planar::position(measured);
  const VariableId keep = tree_.nearest(p);
  tree_.keep_subtree(keep);
  tree_.set_position(keep, p);
  root_yaw_ = measured[planar::kYaw];
}

}  // namespace jist
