#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "jist/types.hpp"

namespace jist {

/// Distance stored where no obstacle is visible.
constexpr double kUnknownDistance = 1e6;

/// Oriented rectangle obstacle footprint.
struct Rect {
  Vec2 center{0.0, 0.0};
  Vec2 half_extents{0.5, 0.5};
  double angle = 0.0;

  static Rect square(const Vec2& center, double side) { return {center, Vec2::Constant(0.5 * side), 0.0}; }
  static Rect box(const Vec2& center, double width, double height) {
    return {center, Vec2(0.5 * width, 0.5 * height), 0.0};
  }
  bool contains(const Vec2& p) const;
};

/// Exact signed distance from `p` to the rectangle boundary, negative inside.
double signed_distance(const Rect& rect, const Vec2& p);

/// Square visibility window.
struct Window {
  Vec2 center{0.0, 0.0};
  double half_extent = 15.0;

  bool intersects(const Rect& rect) const;
};

struct SdfSample {
  double distance = 0.0;
  Vec2 gradient{0.0, 0.0};
};

/**
 * Signed distances sampled at cell centers, row-major (row = y index).
 * Queries interpolate bilinearly between centers.
 */
class SdfGrid {
 public:
  SdfGrid() = default;
  SdfGrid(Vec2 origin, double resolution, int width, int height, std::vector<double> data);

  const Vec2& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<double>& data() const { return data_; }

  double at(int ix, int iy) const { return data_[static_cast<std::size_t>(iy) * width_ + ix]; }
  Vec2 cell_center(int ix, int iy) const {
    return origin_ + resolution_ * Vec2(static_cast<double>(ix), static_cast<double>(iy));
  }

  /// True when `p` lies inside the span of cell centers.
  bool contains(const Vec2& p) const;

  /// Interpolated distance and the gradient of the bilinear patch; nullopt
  /// outside the window (unknown space).
  std::optional<SdfSample> query(const Vec2& p) const;

  /// Text dump: header `origin_x origin_y resolution width height`, then
  /// one line per row of space-separated values.
  void write_text(std::ostream& os) const;
  static SdfGrid read_text(std::istream& is);

 private:
  Vec2 origin_{0.0, 0.0};
  double resolution_ = 1.0;
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Exact signed distance to the rectangles intersecting `window`, at every
/// cell center. The grid spans [center - half_extent, center + half_extent].
SdfGrid build_sdf(std::span<const Rect> obstacles, const Window& window, double resolution);

/// Hinge obstacle cost: eps - dist inside the safety margin, 0 beyond it.
inline double hinge_cost(double dist, double eps) { return dist <= eps ? eps - dist : 0.0; }

/// Robot body as a set of disks in the body frame. A disk robot is one point
/// at the origin.
struct RobotShape {
  std::vector<Vec2> points;
  std::vector<double> radii;

  static RobotShape disk(double radius) { return {{Vec2::Zero()}, {radius}}; }
  static RobotShape point_set(std::vector<Vec2> points, std::vector<double> radii);

  /// Largest extent of any body disk from the body origin.
  double bounding_radius() const;
};

struct BodyPoint {
  Vec2 position;
  double radius = 0.0;
  /// d(position) / d(x, y, yaw).
  Eigen::Matrix<double, 2, 3> jacobian;
};

/// World-frame body points for a planar configuration [x, y, yaw, ...].
std::vector<BodyPoint> body_points(const RobotShape& shape, const StateVector& config);

}  // namespace jist
