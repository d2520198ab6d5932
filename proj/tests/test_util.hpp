#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "jist/factor_graph.hpp"

namespace jist::test {

/// h = sum_i A_i * theta_i - m with a fixed information matrix.
class LinearFactor final : public Factor {
 public:
  LinearFactor(std::vector<Eigen::MatrixXd> a, Eigen::VectorXd m, Eigen::MatrixXd info)
      : a_(std::move(a)), m_(std::move(m)), info_(std::move(info)) {}

  std::size_t arity() const override { return a_.size(); }
  int residual_dim() const override { return static_cast<int>(m_.size()); }
  std::string_view name() const override { return "linear"; }
  Eigen::VectorXd evaluate(std::span<const StateVector* const> states,
                           std::vector<Eigen::MatrixXd>* jacobians) const override {
    Eigen::VectorXd h = -m_;
    for (std::size_t i = 0; i < a_.size(); ++i) h += a_[i] * *states[i];
    if (jacobians) *jacobians = a_;
    return h;
  }
  Eigen::MatrixXd information() const override { return info_; }

  const std::vector<Eigen::MatrixXd>& blocks() const { return a_; }
  const Eigen::VectorXd& offset() const { return m_; }

 private:
  std::vector<Eigen::MatrixXd> a_;
  Eigen::VectorXd m_;
  Eigen::MatrixXd info_;
};

/// Unary residual h_j = sin(theta_j) + theta_j^2 / 2 - m_j, smooth and nonconvex.
class WavyFactor final : public Factor {
 public:
  explicit WavyFactor(Eigen::VectorXd m) : m_(std::move(m)) {}
  std::size_t arity() const override { return 1; }
  int residual_dim() const override { return static_cast<int>(m_.size()); }
  std::string_view name() const override { return "wavy"; }
  Eigen::VectorXd evaluate(std::span<const StateVector* const> states,
                           std::vector<Eigen::MatrixXd>* jacobians) const override {
    const Eigen::VectorXd& x = *states[0];
    if (jacobians) {
      jacobians->assign(1, Eigen::MatrixXd((x.array().cos() + x.array()).matrix().asDiagonal()));
    }
    return (x.array().sin() + 0.5 * x.array().square()).matrix() - m_;
  }
  Eigen::MatrixXd information() const override { return Eigen::MatrixXd::Identity(m_.size(), m_.size()); }

 private:
  Eigen::VectorXd m_;
};

inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
  return b * b.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

/// Central differences of `f` at `x`, one column per coordinate.
inline Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[i] += h;
    xm[i] -= h;
    j.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

/// Relative comparison with an absolute floor for near-zero entries.
inline bool jacobian_close(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric, double rel = 1e-4) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) return false;
  const double scale = std::max(1.0, numeric.cwiseAbs().maxCoeff());
  return (analytic - numeric).cwiseAbs().maxCoeff() <= rel * scale;
}

}  // namespace jist::test
