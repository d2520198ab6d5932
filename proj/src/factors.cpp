#include "jist/factors.hpp"

#include <cmath>

namespace jist {

namespace {

void check_same_dim(const StateVector& a, const StateVector& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::dimension_mismatch, "state dimensions differ");
}

Eigen::MatrixXd phi_of(int dof, double dt) {
  Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(2 * dof, 2 * dof);
  phi.block(0, dof, dof, dof).diagonal().setConstant(dt);
  return phi;
}

Eigen::MatrixXd q_of(const Eigen::VectorXd& qc, double dt) {
  const auto dof = qc.size();
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2 * dof, 2 * dof);
  q.block(0, 0, dof, dof).diagonal() = qc * (dt * dt * dt / 3.0);
  q.block(0, dof, dof, dof).diagonal() = qc * (dt * dt / 2.0);
  q.block(dof, 0, dof, dof).diagonal() = qc * (dt * dt / 2.0);
  q.block(dof, dof, dof, dof).diagonal() = qc * dt;
  return q;
}

}  // namespace

NoiseModel NoiseModel::isotropic(double sigma, int dim) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "noise sigma must be positive");
  return {Kind::isotropic, Eigen::VectorXd::Constant(dim, sigma)};
}

NoiseModel NoiseModel::diagonal(Eigen::VectorXd sigmas) {
  if (sigmas.size() == 0 || !(sigmas.array() > 0.0).all()) {
    throw Error(ErrorCode::invalid_argument, "noise sigmas must be positive");
  }
  return {Kind::diagonal, std::move(sigmas)};
}

Eigen::MatrixXd NoiseModel::information() const {
  return sigma.array().square().inverse().matrix().asDiagonal();
}

void GpParams::check() const {
  if (qc.size() == 0 || !(qc.array() > 0.0).all()) throw Error(ErrorCode::invalid_argument, "Q_c must be positive");
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "GP dt must be positive");
}

GpTransition gp_transition(const Eigen::VectorXd& qc, double dt) {
  return {phi_of(static_cast<int>(qc.size()), dt), q_of(qc, dt)};
}

GpTransition gp_transition(const GpParams& p) {
  p.check();
  return gp_transition(p.qc, p.dt);
}

Eigen::MatrixXd gp_q_inverse(const Eigen::VectorXd& qc, double dt) {
  const auto dof = qc.size();
  const Eigen::VectorXd inv = qc.cwiseInverse();
  Eigen::MatrixXd qi = Eigen::MatrixXd::Zero(2 * dof, 2 * dof);
  qi.block(0, 0, dof, dof).diagonal() = inv * (12.0 / (dt * dt * dt));
  qi.block(0, dof, dof, dof).diagonal() = inv * (-6.0 / (dt * dt));
  qi.block(dof, 0, dof, dof).diagonal() = inv * (-6.0 / (dt * dt));
  qi.block(dof, dof, dof, dof).diagonal() = inv * (4.0 / dt);
  return qi;
}

Residual gp_prior_residual(const StateVector& theta_t, const StateVector& theta_next, const GpParams& p) {
  check_same_dim(theta_t, theta_next);
  if (theta_t.size() != 2 * p.dof()) throw Error(ErrorCode::dimension_mismatch, "GP state must have length 2d");
  const Eigen::MatrixXd phi = phi_of(p.dof(), p.dt);
  Residual r;
  r.value = phi * theta_t - theta_next;
  r.jacobians = {phi, -Eigen::MatrixXd::Identity(theta_t.size(), theta_t.size())};
  return r;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gp_interpolation_matrices(const GpParams& p, double tau) {
  p.check();
  if (!(tau >= 0.0 && tau <= p.dt)) throw Error(ErrorCode::out_of_range, "tau must lie in [0, dt]");
  const int dof = p.dof();
  const Eigen::MatrixXd psi =
      q_of(p.qc, tau) * phi_of(dof, p.dt - tau).transpose() * gp_q_inverse(p.qc, p.dt);
  const Eigen::MatrixXd lambda = phi_of(dof, tau) - psi * phi_of(dof, p.dt);
  return {lambda, psi};
}

GpInterpolation gp_interpolate(const StateVector& theta_t, const StateVector& theta_next, const GpParams& p,
                               double tau) {
  check_same_dim(theta_t, theta_next);
  auto [lambda, psi] = gp_interpolation_matrices(p, tau);
  if (theta_t.size() != lambda.cols()) throw Error(ErrorCode::dimension_mismatch, "GP state must have length 2d");
  GpInterpolation out;
  out.state = lambda * theta_t + psi * theta_next;
  out.lambda = std::move(lambda);
  out.psi = std::move(psi);
  return out;
}

// ---------------------------------------------------------------------------

Residual obstacle_residual(const StateVector& theta, const SdfGrid& sdf, const RobotShape& shape, double eps,
                           std::uint64_t* unknown_count) {
  const auto points = body_points(shape, theta);
  Residual r;
  r.value = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(points.size()));
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(points.size()), theta.size());
  for (std::size_t j = 0; j < points.size(); ++j) {
    const auto sample = sdf.query(points[j].position);
    if (!sample) {
      if (unknown_count) ++*unknown_count;
      continue;
    }
    const double d = sample->distance - points[j].radius;
    if (d <= eps) {
      const auto row = static_cast<Eigen::Index>(j);
      r.value[row] = eps - d;
      jac.block(row, 0, 1, 3) = -sample->gradient.transpose() * points[j].jacobian;
    }
  }
  r.jacobians = {std::move(jac)};
  return r;
}

Residual interp_obstacle_residual(const StateVector& theta_t, const StateVector& theta_next, double tau,
                                  const GpParams& p, const SdfGrid& sdf, const RobotShape& shape, double eps,
                                  std::uint64_t* unknown_count) {
  const GpInterpolation ip = gp_interpolate(theta_t, theta_next, p, tau);
  Residual at = obstacle_residual(ip.state, sdf, shape, eps, unknown_count);
  Residual r;
  r.value = std::move(at.value);
  r.jacobians = {at.jacobians[0] * ip.lambda, at.jacobians[0] * ip.psi};
  return r;
}

NoiseModel goal_cov_scale(const StateVector& current, const StateVector& start, const StateVector& goal,
                          double sigma_goal) {
  check_same_dim(current, goal);
  check_same_dim(start, goal);
  const double denom = (start - goal).squaredNorm();
  if (denom == 0.0) throw Error(ErrorCode::invalid_argument, "start equals goal");
  const double ratio = std::max(kGoalScaleFloor, (current - goal).squaredNorm() / denom);
  return NoiseModel::isotropic(sigma_goal * std::sqrt(ratio), static_cast<int>(goal.size()));
}

Residual limit_residual(const StateVector& theta, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        double eps, LimitMode mode) {
  if (lower.size() != theta.size() || upper.size() != theta.size()) {
    throw Error(ErrorCode::dimension_mismatch, "limit vectors must match the state");
  }
  Residual r;
  r.value = Eigen::VectorXd::Zero(theta.size());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(theta.size(), theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double upper_trigger = mode == LimitMode::verbatim ? upper[i] + eps : upper[i] - eps;
    if (theta[i] < lower[i] + eps) {
      r.value[i] = lower[i] + eps - theta[i];
      jac(i, i) = -1.0;
    } else if (theta[i] > upper_trigger) {
      r.value[i] = theta[i] - upper_trigger;
      jac(i, i) = 1.0;
    }
  }
  r.jacobians = {std::move(jac)};
  return r;
}

Residual nonholonomic_residual(const StateVector& theta) {
  if (theta.size() != planar::kStateDim) throw Error(ErrorCode::dimension_mismatch, "non-holonomic factor needs a planar state");
  const double yaw = theta[planar::kYaw];
  const double vx = theta[planar::kVx];
  const double vy = theta[planar::kVy];
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Residual r;
  r.value = Eigen::VectorXd::Constant(1, vy * c - vx * s);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(1, planar::kStateDim);
  jac(0, planar::kYaw) = -vy * s - vx * c;
  jac(0, planar::kVx) = -s;
  jac(0, planar::kVy) = c;
  r.jacobians = {std::move(jac)};
  return r;
}

// ---------------------------------------------------------------------------

GpPriorFactor::GpPriorFactor(GpParams p) : params_(std::move(p)) {
  params_.check();
  phi_ = phi_of(params_.dof(), params_.dt);
  info_ = gp_q_inverse(params_.qc, params_.dt);
}

Eigen::VectorXd GpPriorFactor::evaluate(std::span<const StateVector* const> states,
                                        std::vector<Eigen::MatrixXd>* jacobians) const {
  const StateVector& a = *states[0];
  const StateVector& b = *states[1];
  if (jacobians) {
    *jacobians = {phi_, -Eigen::MatrixXd::Identity(a.size(), a.size())};
  }
  return phi_ * a - b;
}

ObstacleFactor::ObstacleFactor(std::shared_ptr<const ObstacleContext> ctx, double eps, double sigma)
    : ctx_(std::move(ctx)), eps_(eps), sigma_(sigma) {
  if (!ctx_) throw Error(ErrorCode::invalid_argument, "obstacle factor needs a context");
  if (!(sigma_ > 0.0) || !(eps_ > 0.0)) throw Error(ErrorCode::invalid_argument, "obstacle eps and sigma must be positive");
}

Eigen::VectorXd ObstacleFactor::evaluate(std::span<const StateVector* const> states,
                                         std::vector<Eigen::MatrixXd>* jacobians) const {
  const StateVector& x = *states[0];
  if (!ctx_->sdf) {
    if (jacobians) *jacobians = {Eigen::MatrixXd::Zero(residual_dim(), x.size())};
    return Eigen::VectorXd::Zero(residual_dim());
  }
  std::uint64_t unknown = 0;
  Residual r = obstacle_residual(x, *ctx_->sdf, ctx_->shape, eps_, &unknown);
  if (unknown) ctx_->unknown_queries += unknown;
  if (jacobians) *jacobians = std::move(r.jacobians);
  return r.value;
}

Eigen::MatrixXd ObstacleFactor::information() const {
  return Eigen::MatrixXd::Identity(residual_dim(), residual_dim()) / (sigma_ * sigma_);
}

InterpObstacleFactor::InterpObstacleFactor(std::shared_ptr<const ObstacleContext> ctx, double eps, double tau,
                                           GpParams p, double sigma)
    : ctx_(std::move(ctx)), eps_(eps), tau_(tau), params_(std::move(p)), sigma_(sigma) {
  if (!ctx_) throw Error(ErrorCode::invalid_argument, "obstacle factor needs a context");
  if (!(sigma_ > 0.0) || !(eps_ > 0.0)) throw Error(ErrorCode::invalid_argument, "obstacle eps and sigma must be positive");
  params_.check();
  if (!(tau_ > 0.0 && tau_ < params_.dt)) throw Error(ErrorCode::out_of_range, "interpolation tau must lie in (0, dt)");
  std::tie(lambda_, psi_) = gp_interpolation_matrices(params_, tau_);
}

Eigen::VectorXd InterpObstacleFactor::evaluate(std::span<const StateVector* const> states,
                                               std::vector<Eigen::MatrixXd>* jacobians) const {
  const StateVector& a = *states[0];
  const StateVector& b = *states[1];
  if (!ctx_->sdf) {
    if (jacobians) {
      *jacobians = {Eigen::MatrixXd::Zero(residual_dim(), a.size()), Eigen::MatrixXd::Zero(residual_dim(), b.size())};
    }
    return Eigen::VectorXd::Zero(residual_dim());
  }
  const StateVector mid = lambda_ * a + psi_ * b;
  std::uint64_t unknown = 0;
  Residual r = obstacle_residual(mid, *ctx_->sdf, ctx_->shape, eps_, &unknown);
  if (unknown) ctx_->unknown_queries += unknown;
  if (jacobians) *jacobians = {r.jacobians[0] * lambda_, r.jacobians[0] * psi_};
  return r.value;
}

Eigen::MatrixXd InterpObstacleFactor::information() const {
  return Eigen::MatrixXd::Identity(residual_dim(), residual_dim()) / (sigma_ * sigma_);
}

StatePriorFactor::StatePriorFactor(StateVector target, NoiseModel noise)
    : target_(std::move(target)), noise_(std::move(noise)) {
  if (noise_.dim() != target_.size()) throw Error(ErrorCode::dimension_mismatch, "noise model does not match target");
}

Eigen::VectorXd StatePriorFactor::evaluate(std::span<const StateVector* const> states,
                                           std::vector<Eigen::MatrixXd>* jacobians) const {
  const StateVector& x = *states[0];
  if (x.size() != target_.size()) throw Error(ErrorCode::dimension_mismatch, "state does not match prior target");
  if (jacobians) *jacobians = {Eigen::MatrixXd::Identity(x.size(), x.size())};
  return x - target_;
}

void StatePriorFactor::set_target(StateVector target) {
  if (target.size() != target_.size()) throw Error(ErrorCode::dimension_mismatch, "prior target dimension changed");
  target_ = std::move(target);
}

void StatePriorFactor::set_noise(NoiseModel noise) {
  if (noise.dim() != target_.size()) throw Error(ErrorCode::dimension_mismatch, "noise model does not match target");
  noise_ = std::move(noise);
}

LimitFactor::LimitFactor(Eigen::VectorXd lower, Eigen::VectorXd upper, double eps, double sigma, LimitMode mode)
    : lower_(std::move(lower)), upper_(std::move(upper)), eps_(eps), sigma_(sigma), mode_(mode) {
  if (lower_.size() != upper_.size()) throw Error(ErrorCode::dimension_mismatch, "limit vectors differ in size");
  if (!(lower_.array() < upper_.array()).all()) throw Error(ErrorCode::invalid_argument, "limits need lower < upper");
  if (!(sigma_ > 0.0)) throw Error(ErrorCode::invalid_argument, "limit sigma must be positive");
}

Eigen::VectorXd LimitFactor::evaluate(std::span<const StateVector* const> states,
                                      std::vector<Eigen::MatrixXd>* jacobians) const {
  Residual r = limit_residual(*states[0], lower_, upper_, eps_, mode_);
  if (jacobians) *jacobians = std::move(r.jacobians);
  return r.value;
}

Eigen::MatrixXd LimitFactor::information() const {
  return Eigen::MatrixXd::Identity(residual_dim(), residual_dim()) / (sigma_ * sigma_);
}

NonholonomicFactor::NonholonomicFactor(double sigma) : sigma_(sigma) {
  if (!(sigma_ > 0.0)) throw Error(ErrorCode::invalid_argument, "non-holonomic sigma must be positive");
}

Eigen::VectorXd NonholonomicFactor::evaluate(std::span<const StateVector* const> states,
                                             std::vector<Eigen::MatrixXd>* jacobians) const {
  Residual r = nonholonomic_residual(*states[0]);
  if (jacobians) *jacobians = std::move(r.jacobians);
  return r.value;
}

Eigen::MatrixXd NonholonomicFactor::information() const {
  return Eigen::MatrixXd::Constant(1, 1, 1.0 / (sigma_ * sigma_));
}

}  // namespace jist
