#include "jist/planning.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace jist {

void FactorSettings::check() const {
  if (qc.size() != planar::kDof || !(qc.array() > 0.0).all()) {
    throw Error(ErrorCode::config, "qc must have three positive entries");
  }
  if (!(sigma_current > 0.0 && sigma_obstacle > 0.0 && sigma_goal > 0.0 && sigma_limit > 0.0 &&
        sigma_nonholonomic > 0.0)) {
    throw Error(ErrorCode::config, "factor sigmas must be positive");
  }
  if (!(obstacle_eps > 0.0)) throw Error(ErrorCode::config, "obstacle eps must be positive");
  if (n_interp < 0) throw Error(ErrorCode::config, "n_interp must be >= 0");
  if (limit_eps < 0.0) throw Error(ErrorCode::config, "limit eps must be >= 0");
  if (!(max_speed > 0.0 && max_yaw_rate > 0.0)) throw Error(ErrorCode::config, "speed limits must be positive");
}

Eigen::VectorXd FactorSettings::lower_limits() const { return -upper_limits(); }

Eigen::VectorXd FactorSettings::upper_limits() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd u(planar::kStateDim);
  u << inf, inf, inf, max_speed, max_speed, max_yaw_rate;
  return u;
}

// ---------------------------------------------------------------------------

TrajectoryFactors::TrajectoryFactors(FactorSettings settings, RobotShape shape, double dt, StateVector start,
                                     StateVector goal)
    : settings_(std::move(settings)), start_(std::move(start)), goal_(std::move(goal)) {
  settings_.check();
  if (start_.size() != planar::kStateDim || goal_.size() != planar::kStateDim) {
    throw Error(ErrorCode::dimension_mismatch, "start and goal must be planar states");
  }
  gp_.qc = settings_.qc;
  gp_.dt = dt;
  gp_.check();
  ctx_ = std::make_shared<ObstacleContext>();
  ctx_->shape = std::move(shape);
  gp_factor_ = std::make_shared<GpPriorFactor>(gp_);
  obstacle_ = std::make_shared<ObstacleFactor>(ctx_, settings_.obstacle_eps, settings_.sigma_obstacle);
  for (int i = 1; i <= settings_.n_interp; ++i) {
    const double tau = dt * i / (settings_.n_interp + 1);
    interp_.push_back(
        std::make_shared<InterpObstacleFactor>(ctx_, settings_.obstacle_eps, tau, gp_, settings_.sigma_obstacle));
  }
  goal_factor_ = std::make_shared<GoalFactor>(goal_, goal_cov_scale(start_, start_, goal_, settings_.sigma_goal));
  current_ = std::make_shared<CurrentStateFactor>(
      start_, NoiseModel::isotropic(settings_.sigma_current, planar::kStateDim));
  limit_ = std::make_shared<LimitFactor>(settings_.lower_limits(), settings_.upper_limits(), settings_.limit_eps,
                                         settings_.sigma_limit, settings_.limit_mode);
  nonholonomic_ = std::make_shared<NonholonomicFactor>(settings_.sigma_nonholonomic);
}

void TrajectoryFactors::set_sdf(std::shared_ptr<const SdfGrid> sdf) { ctx_->sdf = std::move(sdf); }

void TrajectoryFactors::update_goal_noise(const StateVector& current) {
  goal_factor_->set_noise(goal_cov_scale(current, start_, goal_, settings_.sigma_goal));
}

void TrajectoryFactors::attach_node(FactorGraph& graph, VariableId id) const {
  graph.add_factor(obstacle_, {id});
  graph.add_factor(goal_factor_, {id});
  graph.add_factor(limit_, {id});
  graph.add_factor(nonholonomic_, {id});
}

void TrajectoryFactors::attach_edge(FactorGraph& graph, VariableId parent, VariableId child) const {
  graph.add_factor(gp_factor_, {parent, child});
  for (const auto& f : interp_) graph.add_factor(f, {parent, child});
  attach_node(graph, child);
}

void TrajectoryFactors::anchor_root(FactorGraph& graph, const StateVector& measured) {
  const VariableId root = graph.root();
  current_->set_target(measured);
  graph.set_value(root, measured);
  bool has_current = false;
  const std::vector<FactorId> attached = graph.factors_of(root);
  for (FactorId fid : attached) {
    const auto& entry = graph.factor(fid);
    if (entry.vars.size() != 1) continue;
    if (entry.factor == current_) {
      has_current = true;
    } else {
      graph.remove_factor(fid);
    }
  }
  if (!has_current) graph.add_factor(current_, {root});
}

// ---------------------------------------------------------------------------

const char* to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::success: return "success";
    case Outcome::collision: return "collision";
    case Outcome::timeout: return "timeout";
    case Outcome::failure: return "failure";
  }
  return "unknown";
}

double EpisodeResult::mean_compute() const {
  if (compute_seconds.empty()) return 0.0;
  double s = 0.0;
  for (double c : compute_seconds) s += c;
  return s / static_cast<double>(compute_seconds.size());
}

void write_trace_line(std::ostream& os, const IterationRecord& rec) {
  char buf[96];
  os << rec.iteration;
  std::snprintf(buf, sizeof buf, " %.4f", rec.time);
  os << buf;
  for (Eigen::Index i = 0; i < rec.root.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %.6f", rec.root[i]);
    os << buf;
  }
  const std::size_t depth = rec.step.best_path.empty() ? 0 : rec.step.best_path.size() - 1;
  std::snprintf(buf, sizeof buf, " %zu %.6g %zu %.6f\n", depth, rec.step.normalized_cost, rec.step.graph_size,
                rec.step.compute_seconds);
  os << buf;
}

EpisodeResult run_episode(World& world, Planner& planner, const StateVector& start, const StateVector& goal,
                          const EpisodeOptions& options) {
  EpisodeResult result;
  result.initial_distance = (planar::position(start) - planar::position(goal)).norm();
  planner.reset(start, goal, world.bounds());
  StateVector root = world.last_measurement();
  while (true) {
    if (world.goal_reached(goal, planner.goal_tolerance())) {
      result.outcome = Outcome::success;
      break;
    }
    if (result.iterations >= planner.max_iterations()) {
      result.outcome = Outcome::timeout;
      break;
    }
    auto sdf = std::make_shared<const SdfGrid>(world.observe_sdf());
    PlanStep step;
    try {
      step = planner.plan(std::move(sdf));
    } catch (const Error& e) {
      result.outcome = Outcome::failure;
      result.error = e.what();
      break;
    }
    result.compute_seconds.push_back(step.compute_seconds);
    IterationRecord rec{result.iterations, world.time(), root, step};
    if (options.trace) write_trace_line(*options.trace, rec);
    if (options.observer) options.observer(rec);

    const Vec2 before = planar::position(world.robot_true());
    world.execute_transition(step.next_state, planner.dt());
    result.path_length += (planar::position(world.robot_true()) - before).norm();
    ++result.iterations;
    if (world.collided()) {
      result.outcome = Outcome::collision;
      break;
    }
    root = world.measure_state();
    try {
      planner.commit(step, root);
    } catch (const Error& e) {
      result.outcome = Outcome::failure;
      result.error = e.what();
      break;
    }
  }
  result.execution_time = static_cast<double>(result.iterations) * planner.dt();
  if (result.outcome == Outcome::success && result.initial_distance > 0.0) {
    result.normalized_distance = result.path_length / result.initial_distance;
  }
  return result;
}

}  // namespace jist
