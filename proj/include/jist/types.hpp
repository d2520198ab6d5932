#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace jist {

/// Robot state: configuration position followed by configuration velocity (length 2d).
using StateVector = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;

enum class ErrorCode : int {
  invalid_argument = 1,
  unknown_variable,
  arity_mismatch,
  non_edge,
  dimension_mismatch,
  singular_system,
  non_finite,
  out_of_range,
  config,
  io,
  placement,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Index layout of the planar state [x, y, yaw, vx, vy, yaw_rate].
namespace planar {
constexpr int kX = 0;
constexpr int kY = 1;
constexpr int kYaw = 2;
constexpr int kVx = 3;
constexpr int kVy = 4;
constexpr int kYawRate = 5;
constexpr int kDof = 3;
constexpr int kStateDim = 6;

inline StateVector make_state(double x, double y, double yaw, double vx = 0.0,
                              double vy = 0.0, double yaw_rate = 0.0) {
  StateVector s(kStateDim);
  s << x, y, yaw, vx, vy, yaw_rate;
  return s;
}

inline Vec2 position(const StateVector& s) { return {s[kX], s[kY]}; }
}  // namespace planar

/// Axis-aligned world rectangle [min, max].
struct Bounds {
  Vec2 min{0.0, 0.0};
  Vec2 max{0.0, 0.0};

  bool contains(const Vec2& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
  Vec2 clamp(const Vec2& p) const { return p.cwiseMax(min).cwiseMin(max); }
};

/// Shift `angle` by multiples of 2*pi so it lies within pi of `reference`.
double unwrap_near(double angle, double reference);

}  // namespace jist
