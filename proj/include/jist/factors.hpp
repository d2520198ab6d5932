#pragma once

#include <atomic>
#include <memory>
#include <vector>

#include "jist/factor_graph.hpp"
#include "jist/sdf.hpp"

namespace jist {

/// Gaussian noise with Sigma = diag(sigma^2).
struct NoiseModel {
  enum class Kind { isotropic, diagonal };

  Kind kind = Kind::isotropic;
  Eigen::VectorXd sigma;

  static NoiseModel isotropic(double sigma, int dim);
  static NoiseModel diagonal(Eigen::VectorXd sigmas);

  int dim() const { return static_cast<int>(sigma.size()); }
  Eigen::MatrixXd information() const;
};

/// Constant-velocity GP prior parameters: Q_c diagonal and step length.
struct GpParams {
  Eigen::VectorXd qc;
  double dt = 1.0;

  int dof() const { return static_cast<int>(qc.size()); }
  void check() const;
};

struct GpTransition {
  Eigen::MatrixXd phi;
  Eigen::MatrixXd q;
};

/// Phi and Q of the constant-velocity model over `p.dt`.
GpTransition gp_transition(const GpParams& p);
GpTransition gp_transition(const Eigen::VectorXd& qc, double dt);
/// Closed-form Q^-1.
Eigen::MatrixXd gp_q_inverse(const Eigen::VectorXd& qc, double dt);

struct Residual {
  Eigen::VectorXd value;
  std::vector<Eigen::MatrixXd> jacobians;
};

/// h = Phi * theta_t - theta_next; Jacobians Phi and -I.
Residual gp_prior_residual(const StateVector& theta_t, const StateVector& theta_next, const GpParams& p);

struct GpInterpolation {
  StateVector state;
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd psi;
};

/// State at `tau` in [0, dt] conditioned on both endpoints.
GpInterpolation gp_interpolate(const StateVector& theta_t, const StateVector& theta_next, const GpParams& p,
                               double tau);

/// Interpolation matrices (Lambda, Psi) for a given tau; independent of the states.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gp_interpolation_matrices(const GpParams& p, double tau);

/// The SDF snapshot shared by every obstacle factor of a graph. Swapping the
/// grid updates all of them at once.
struct ObstacleContext {
  std::shared_ptr<const SdfGrid> sdf;
  RobotShape shape = RobotShape::disk(0.0);
  /// Body points that fell outside the SDF window (treated as free).
  mutable std::atomic<std::uint64_t> unknown_queries{0};
};

/// Hinge residual per body point and its Jacobian w.r.t. the full state.
Residual obstacle_residual(const StateVector& theta, const SdfGrid& sdf, const RobotShape& shape, double eps,
                           std::uint64_t* unknown_count = nullptr);

Residual interp_obstacle_residual(const StateVector& theta_t, const StateVector& theta_next, double tau,
                                  const GpParams& p, const SdfGrid& sdf, const RobotShape& shape, double eps,
                                  std::uint64_t* unknown_count = nullptr);

/// Sigma_goal = sigma_goal^2 * max(1e-4, |cur - goal|^2 / |start - goal|^2) * I.
NoiseModel goal_cov_scale(const StateVector& current, const StateVector& start, const StateVector& goal,
                          double sigma_goal);
constexpr double kGoalScaleFloor = 1e-4;

enum class LimitMode {
  /// Penalize below ll + eps and above ul + eps.
  verbatim,
  /// Penalize below ll + eps and above ul - eps.
  safety,
};

Residual limit_residual(const StateVector& theta, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        double eps, LimitMode mode = LimitMode::verbatim);

/// h = vy * cos(yaw) - vx * sin(yaw) on [x, y, yaw, vx, vy, yaw_rate].
Residual nonholonomic_residual(const StateVector& theta);

// ---------------------------------------------------------------------------
// Factor types

class GpPriorFactor final : public Factor {
 public:
  explicit GpPriorFactor(GpParams p);
  std::size_t arity() const override { return 2; }
  int residual_dim() const override { return 2 * params_.dof(); }
  std::string_view name() const override { return "gp_prior"; }
  Eigen::VectorXd evaluate(std::span<const StateVector* const> states,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;
  Eigen::MatrixXd information() const override { return info_; }
  const GpParams& params() const { return params_; }

 private:
  GpParams params_;
  Eigen::MatrixXd phi_;
  Eigen::MatrixXd info_;
};

class ObstacleFactor final : public Factor {
 public:
  ObstacleFactor(std::shared_ptr<const ObstacleContext> ctx, double eps, double sigma);
  std::size_t arity() const override { return 1; }
  int residual_dim() const override { return static_cast<int>(ctx_->shape.points.size()); }
  std::string_view name() const override { return "obstacle"; }
  Eigen::VectorXd evaluate(std::span<const StateVector* const> states,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;
  Eigen::MatrixXd information() const override;

 private:
  std::shared_ptr<const ObstacleContext> ctx_;
  double eps_;
  double sigma_;
};

class InterpObstacleFactor final : public Factor {
 public:
  InterpObstacleFactor(std::shared_ptr<const ObstacleContext> ctx, double eps, double tau, GpParams p, double sigma);
  std::size_t arity() const override { return 2; }
  int residual_dim() const override { return static_cast<int>(ctx_->shape.points.size()); }
  std::string_view name() const override { return "interp_obstacle"; }
  Eigen::VectorXd evaluate(std::span<const StateVector* const> states,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;
  Eigen::MatrixXd information() const override;
  double tau() const { return tau_; }

 private:
  std::shared_ptr<const ObstacleContext> ctx_;
  double eps_;
  double tau_;
  GpParams params_;
  Eigen::MatrixXd lambda_;
  Eigen::MatrixXd psi_;
  double sigma_;
};

/// Gaussian prior h = theta - target. Serves the current-state and goal factors.
class StatePriorFactor : public Factor {
 public:
  StatePriorFactor(StateVector target, NoiseModel noise);
  std::size_t arity() const override { return 1; }
  int residual_dim() const override { return static_cast<int>(target_.size()); }
  Eigen::VectorXd evaluate(std::span<const StateVector* const> states,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;
  Eigen::MatrixXd information() const override { return noise_.information(); }

  const StateVector& target() const { return target_; }
  void set_target(StateVector target);
  const NoiseModel& noise() const { return noise_; }
  void set_noise(NoiseModel noise);

 private:
  StateVector target_;
  NoiseModel noise_;
};

class CurrentStateFactor final : public StatePriorFactor {
 public:
  using StatePriorFactor::StatePriorFactor;
  std::string_view name() const override { return "current"; }
};

class GoalFactor final : public StatePriorFactor {
 public:
  using StatePriorFactor::StatePriorFactor;
  std::string_view name() const override { return "goal"; }
};

class LimitFactor final : public Factor {
 public:
  LimitFactor(Eigen::VectorXd lower, Eigen::VectorXd upper, double eps, double sigma,
              LimitMode mode = LimitMode::verbatim);
  std::size_t arity() const override { return 1; }
  int residual_dim() const override { return static_cast<int>(lower_.size()); }
  std::string_view name() const override { return "limit"; }
  Eigen::VectorXd evaluate(std::span<const StateVector* const> states,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;
  Eigen::MatrixXd information() const override;

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  double eps_;
  double sigma_;
  LimitMode mode_;
};

class NonholonomicFactor final : public Factor {
 public:
  explicit NonholonomicFactor(double sigma);
  std::size_t arity() const override { return 1; }
  int residual_dim() const override { return 1; }
  std::string_view name() const override { return "nonholonomic"; }
  Eigen::VectorXd evaluate(std::span<const StateVector* const> states,
                           std::vector<Eigen::MatrixXd>* jacobians) const override;
  Eigen::MatrixXd information() const override;

 private:
  double sigma_;
};

}  // namespace jist
