#include "jist/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace jist {

namespace {

Vec2 to_local(const Rect& rect, const Vec2& p) {
  const double c = std::cos(rect.angle);
  const double s = std::sin(rect.angle);
  const Vec2 d = p - rect.center;
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

Vec2 world_half_extents(const Rect& rect) {
  const double c = std::abs(std::cos(rect.angle));
  const double s = std::abs(std::sin(rect.angle));
  return {c * rect.half_extents.x() + s * rect.half_extents.y(),
          s * rect.half_extents.x() + c * rect.half_extents.y()};
}

}  // namespace

bool Rect::contains(const Vec2& p) const {
  const Vec2 q = to_local(*this, p);
  return std::abs(q.x()) <= half_extents.x() && std::abs(q.y()) <= half_extents.y();
}

double signed_distance(const Rect& rect, const Vec2& p) {
  const Vec2 q = to_local(rect, p).cwiseAbs() - rect.half_extents;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(std::max(q.x(), q.y()), 0.0);
  return outside + inside;
}

bool Window::intersects(const Rect& rect) const {
  const Vec2 h = world_half_extents(rect);
  return std::abs(rect.center.x() - center.x()) <= half_extent + h.x() &&
         std::abs(rect.center.y() - center.y()) <= half_extent + h.y();
}

// ---------------------------------------------------------------------------

SdfGrid::SdfGrid(Vec2 origin, double resolution, int width, int height, std::vector<double> data)
    : origin_(std::move(origin)), resolution_(resolution), width_(width), height_(height), data_(std::move(data)) {
  if (resolution_ <= 0.0) throw Error(ErrorCode::invalid_argument, "SDF resolution must be positive");
  if (width_ < 2 || height_ < 2) throw Error(ErrorCode::invalid_argument, "SDF grid needs at least 2x2 cells");
  if (data_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
    throw Error(ErrorCode::dimension_mismatch, "SDF data size does not match grid dimensions");
  }
}

bool SdfGrid::contains(const Vec2& p) const {
  const Vec2 f = (p - origin_) / resolution_;
  return f.x() >= 0.0 && f.y() >= 0.0 && f.x() <= width_ - 1 && f.y() <= height_ - 1;
}

std::optional<SdfSample> SdfGrid::query(const Vec2& p) const {
  if (data_.empty() || !contains(p)) return std::nullopt;
  const Vec2 f = (p - origin_) / resolution_;
  const int ix = std::clamp(static_cast<int>(std::floor(f.x())), 0, width_ - 2);
  const int iy = std::clamp(static_cast<int>(std::floor(f.y())), 0, height_ - 2);
  const double tx = f.x() - ix;
  const double ty = f.y() - iy;
  const double v00 = at(ix, iy);
  const double v10 = at(ix + 1, iy);
  const double v01 = at(ix, iy + 1);
  const double v11 = at(ix + 1, iy + 1);
  SdfSample s;
  s.distance = (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11;
  s.gradient.x() = ((1 - ty) * (v10 - v00) + ty * (v11 - v01)) / resolution_;
  s.gradient.y() = ((1 - tx) * (v01 - v00) + tx * (v11 - v10)) / resolution_;
  return s;
}

void SdfGrid::write_text(std::ostream& os) const {
  os.precision(17);
  os << origin_.x() << ' ' << origin_.y() << ' ' << resolution_ << ' ' << width_ << ' ' << height_ << '\n';
  for (int iy = 0; iy < height_; ++iy) {
    for (int ix = 0; ix < width_; ++ix) {
      if (ix) os << ' ';
      os << at(ix, iy);
    }
    os << '\n';
  }
}

SdfGrid SdfGrid::read_text(std::istream& is) {
  Vec2 origin;
  double res = 0.0;
  int w = 0;
  int h = 0;
  if (!(is >> origin.x() >> origin.y() >> res >> w >> h) || w < 2 || h < 2) {
    throw Error(ErrorCode::io, "malformed SDF header");
  }
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  for (double& v : data) {
    if (!(is >> v)) throw Error(ErrorCode::io, "truncated SDF data");
  }
  return SdfGrid(origin, res, w, h, std::move(data));
}

// ---------------------------------------------------------------------------

SdfGrid build_sdf(std::span<const Rect> obstacles, const Window& window, double resolution) {
  if (resolution <= 0.0) throw Error(ErrorCode::invalid_argument, "SDF resolution must be positive");
  if (window.half_extent <= 0.0) throw Error(ErrorCode::invalid_argument, "SDF window must be nonempty");
  const int n = static_cast<int>(std::floor(2.0 * window.half_extent / resolution + 1e-9)) + 1;
  const Vec2 origin = window.center - Vec2::Constant(window.half_extent);

  std::vector<Rect> visible;
  for (const Rect& r : obstacles) {
    if (window.intersects(r)) visible.push_back(r);
  }

  std::vector<double> data(static_cast<std::size_t>(n) * n, kUnknownDistance);
  if (!visible.empty()) {
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const Vec2 p = origin + resolution * Vec2(ix, iy);
        // Outside the union the distance is the nearest rectangle's distance;
        // inside, the magnitude is the distance to the nearest boundary.
        double nearest_boundary = std::numeric_limits<double>::infinity();
        bool inside = false;
        for (const Rect& r : visible) {
          const double d = signed_distance(r, p);
          inside = inside || d < 0.0;
          nearest_boundary = std::min(nearest_boundary, std::abs(d));
        }
        data[static_cast<std::size_t>(iy) * n + ix] = inside ? -nearest_boundary : nearest_boundary;
      }
    }
  }
  return SdfGrid(origin, resolution, n, n, std::move(data));
}

// ---------------------------------------------------------------------------

RobotShape RobotShape::point_set(std::vector<Vec2> points, std::vector<double> radii) {
  if (points.size() != radii.size() || points.empty()) {
    throw Error(ErrorCode::invalid_argument, "robot shape needs one radius per body point");
  }
  for (double r : radii) {
    if (r < 0.0) throw Error(ErrorCode::invalid_argument, "robot radii must be nonnegative");
  }
  return {std::move(points), std::move(radii)};
}

double RobotShape::bounding_radius() const {
  double r = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) r = std::max(r, points[i].norm() + radii[i]);
  return r;
}

std::vector<BodyPoint> body_points(const RobotShape& shape, const StateVector& config) {
  if (config.size() < 3) throw Error(ErrorCode::dimension_mismatch, "planar configuration needs x, y, yaw");
  const double c = std::cos(config[planar::kYaw]);
  const double s = std::sin(config[planar::kYaw]);
  const Vec2 base(config[planar::kX], config[planar::kY]);
  std::vector<BodyPoint> out;
  out.reserve(shape.points.size());
  for (std::size_t i = 0; i < shape.points.size(); ++i) {
    const Vec2& b = shape.points[i];
    BodyPoint bp;
    bp.position = base + Vec2(c * b.x() - s * b.y(), s * b.x() + c * b.y());
    bp.radius = shape.radii[i];
    bp.jacobian << 1.0, 0.0, -s * b.x() - c * b.y(),
                   0.0, 1.0, c * b.x() - s * b.y();
    out.push_back(bp);
  }
  return out;
}

}  // namespace jist
