#include "jist/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace jist {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kPlacementRetries = 10000;

Vec2 uniform_in(std::mt19937_64& rng, const Vec2& lo, const Vec2& hi) {
  std::uniform_real_distribution<double> ux(lo.x(), hi.x());
  std::uniform_real_distribution<double> uy(lo.y(), hi.y());
  const double x = ux(rng);
  return {x, uy(rng)};
}

Eigen::Vector3d gaussian3(std::mt19937_64& rng, const PoseNoise& noise) {
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    if (noise.sigma[i] > 0.0) {
      std::normal_distribution<double> n(noise.mean[i], noise.sigma[i]);
      out[i] = n(rng);
    } else {
      out[i] = noise.mean[i];
    }
  }
  return out;
}

double clearance(const std::vector<Obstacle>& obstacles, const Vec2& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& ob : obstacles) d = std::min(d, signed_distance(ob.footprint, p));
  return d;
}

void reflect_axis(double& pos, double& vel, double lo, double hi) {
  if (hi <= lo) {
    pos = 0.5 * (lo + hi);
    vel = 0.0;
    return;
  }
  // Fold repeatedly in case a step overshoots by more than the span.
  for (int guard = 0; guard < 8 && (pos < lo || pos > hi); ++guard) {
    if (pos < lo) {
      pos = 2.0 * lo - pos;
      vel = std::abs(vel);
    } else if (pos > hi) {
      pos = 2.0 * hi - pos;
      vel = -std::abs(vel);
    }
  }
  pos = std::clamp(pos, lo, hi);
}

Vec2 half_box(const Rect& r) {
  const double c = std::abs(std::cos(r.angle));
  const double s = std::abs(std::sin(r.angle));
  return {c * r.half_extents.x() + s * r.half_extents.y(), s * r.half_extents.x() + c * r.half_extents.y()};
}

}  // namespace

const char* to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::static_grid: return "static";
    case EnvKind::forest: return "forest";
    case EnvKind::patrol: return "patrol";
    case EnvKind::toggle: return "toggle";
    case EnvKind::scripted: return "scripted";
  }
  return "unknown";
}

EnvKind env_kind_from_string(const std::string& name) {
  if (name == "static") return EnvKind::static_grid;
  if (name == "forest") return EnvKind::forest;
  if (name == "patrol") return EnvKind::patrol;
  if (name == "toggle") return EnvKind::toggle;
  if (name == "scripted") return EnvKind::scripted;
  throw Error(ErrorCode::config, "unknown environment '" + name + "'");
}

void EnvConfig::validate() const {
  if (!(world_size.x() > 0.0 && world_size.y() > 0.0)) throw Error(ErrorCode::config, "world size must be positive");
  if (obstacle_count < 0) throw Error(ErrorCode::config, "obstacle count must be >= 0");
  if (!(obstacle_side > 0.0)) throw Error(ErrorCode::config, "obstacle side must be positive");
  if (top_speed < 0.0 || max_accel < 0.0) throw Error(ErrorCode::config, "obstacle speed and acceleration must be >= 0");
  if (robot_radius < 0.0) throw Error(ErrorCode::config, "robot radius must be >= 0");
  if ((exec_noise.sigma.array() < 0.0).any() || (meas_noise.sigma.array() < 0.0).any()) {
    throw Error(ErrorCode::config, "noise sigma must be >= 0");
  }
  if (collision_substeps < 1) throw Error(ErrorCode::config, "collision substeps must be >= 1");
  if (!(sdf_resolution > 0.0) || !(visibility_half_extent > 0.0)) {
    throw Error(ErrorCode::config, "SDF resolution and visibility must be positive");
  }
  if (kind == EnvKind::scripted && !scene) throw Error(ErrorCode::config, "scripted environment needs a scene");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x6a697374u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// ---------------------------------------------------------------------------
// WorldScript

void WorldScript::write_text(std::ostream& os) const {
  char buf[160];
  os << "jist-world-script 1\n";
  std::snprintf(buf, sizeof buf, "bounds %.9g %.9g %.9g %.9g\n", bounds.min.x(), bounds.min.y(), bounds.max.x(),
                bounds.max.y());
  os << buf;
  std::snprintf(buf, sizeof buf, "robot_radius %.9g\n", robot_radius);
  os << buf;
  auto write_state = [&](const char* tag, const StateVector& s) {
    os << tag;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      std::snprintf(buf, sizeof buf, " %.9g", s[i]);
      os << buf;
    }
    os << '\n';
  };
  write_state("start", start);
  write_state("goal", goal);
  for (const auto& f : frames) {
    std::snprintf(buf, sizeof buf, "frame %.9g %zu\n", f.time, f.obstacles.size());
    os << buf;
    for (const auto& r : f.obstacles) {
      std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %.9g %.9g\n", r.center.x(), r.center.y(), r.half_extents.x(),
                    r.half_extents.y(), r.angle);
      os << buf;
    }
  }
}

WorldScript WorldScript::read_text(std::istream& is) {
  WorldScript ws;
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "jist-world-script" || version != 1) {
    throw Error(ErrorCode::io, "not a world script");
  }
  auto read_state = [&](const char* expect) {
    std::string line;
    std::getline(is >> std::ws, line);
    std::istringstream ls(line);
    std::string t;
    ls >> t;
    if (t != expect) throw Error(ErrorCode::io, std::string("world script: expected ") + expect);
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    return StateVector(Eigen::Map<StateVector>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  if (!(is >> tag >> ws.bounds.min.x() >> ws.bounds.min.y() >> ws.bounds.max.x() >> ws.bounds.max.y()) ||
      tag != "bounds") {
    throw Error(ErrorCode::io, "world script: bad bounds line");
  }
  if (!(is >> tag >> ws.robot_radius) || tag != "robot_radius") throw Error(ErrorCode::io, "world script: bad radius");
  ws.start = read_state("start");
  ws.goal = read_state("goal");
  while (is >> tag) {
    if (tag != "frame") throw Error(ErrorCode::io, "world script: expected frame");
    Frame f;
    std::size_t n = 0;
    if (!(is >> f.time >> n)) throw Error(ErrorCode::io, "world script: bad frame header");
    f.obstacles.resize(n);
    for (auto& r : f.obstacles) {
      if (!(is >> r.center.x() >> r.center.y() >> r.half_extents.x() >> r.half_extents.y() >> r.angle)) {
        throw Error(ErrorCode::io, "world script: truncated frame");
      }
    }
    ws.frames.push_back(std::move(f));
  }
  return ws;
}

std::uint64_t WorldScript::hash(std::size_t max_frames) const {
  WorldScript prefix = *this;
  if (max_frames && prefix.frames.size() > max_frames) prefix.frames.resize(max_frames);
  std::ostringstream os;
  prefix.write_text(os);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// World

World::World(EnvConfig cfg, Bounds bounds, std::vector<Obstacle> obstacles, StateVector robot, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      bounds_(bounds),
      obstacles_(std::move(obstacles)),
      robot_(std::move(robot)),
      world_rng_(derive_seed(seed, static_cast<std::uint64_t>(RngStream::world))),
      exec_rng_(derive_seed(seed, static_cast<std::uint64_t>(RngStream::execution))),
      meas_rng_(derive_seed(seed, static_cast<std::uint64_t>(RngStream::measurement))) {
  if (robot_.size() != planar::kStateDim || !robot_.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "robot state must be a finite planar state");
  }
  measured_ = robot_;
  script_.bounds = bounds_;
  script_.robot_radius = cfg_.robot_radius;
  script_.start = robot_;
  script_.goal = robot_;
  refresh_footprints();
}

void World::refresh_footprints() {
  footprints_.clear();
  if (replay_) {
    if (!replay_->frames.empty()) {
      footprints_ = replay_->frames[std::min(replay_frame_, replay_->frames.size() - 1)].obstacles;
    }
    return;
  }
  for (const auto& ob : obstacles_) {
    if (ob.active(time_)) footprints_.push_back(ob.footprint);
  }
}

void World::record_frame() {
  if (recording_) script_.frames.push_back({time_, footprints_});
}

void World::set_recording(bool on) {
  recording_ = on;
  if (on && script_.frames.empty()) record_frame();
}

void World::set_scene_endpoints(const StateVector& start, const StateVector& goal) {
  script_.start = start;
  script_.goal = goal;
}

void World::load_replay(WorldScript script) {
  bounds_ = script.bounds;
  replay_ = std::move(script);
  replay_frame_ = 0;
  refresh_footprints();
}

void World::integrate_obstacle(Obstacle& ob, const Vec2& accel, double dt, const Bounds& bounds, double top_speed) {
  ob.velocity += accel * dt;
  const double speed = ob.velocity.norm();
  if (speed > top_speed) ob.velocity *= top_speed / speed;
  ob.footprint.center += ob.velocity * dt;
  const Vec2 h = half_box(ob.footprint);
  reflect_axis(ob.footprint.center.x(), ob.velocity.x(), bounds.min.x() + h.x(), bounds.max.x() - h.x());
  reflect_axis(ob.footprint.center.y(), ob.velocity.y(), bounds.min.y() + h.y(), bounds.max.y() - h.y());
}

void World::step_world(double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::invalid_argument, "world step dt must be positive");
  time_ += dt;
  if (replay_) {
    ++replay_frame_;
    refresh_footprints();
    record_frame();
    return;
  }
  std::uniform_real_distribution<double> accel(-cfg_.max_accel, cfg_.max_accel);
  for (auto& ob : obstacles_) {
    if (ob.patrol) {
      ob.footprint.center.x() += ob.velocity.x() * dt;
      reflect_axis(ob.footprint.center.x(), ob.velocity.x(), ob.patrol_min_x, ob.patrol_max_x);
    } else if (cfg_.kind == EnvKind::forest) {
      const double ax = accel(world_rng_);
      const double ay = accel(world_rng_);
      integrate_obstacle(ob, Vec2(ax, ay), dt, bounds_, cfg_.top_speed);
    } else if (ob.velocity.squaredNorm() > 0.0) {
      // Scripted obstacles glide at constant velocity.
      ob.footprint.center += ob.velocity * dt;
    }
  }
  refresh_footprints();
  record_frame();
}

SdfGrid World::observe_sdf() const { return observe_sdf(planar::position(measured_)); }

SdfGrid World::observe_sdf(const Vec2& center) const {
  return build_sdf(footprints_, Window{center, cfg_.visibility_half_extent}, cfg_.sdf_resolution);
}

bool World::in_collision(const Vec2& p, double radius) const {
  for (const auto& r : footprints_) {
    if (signed_distance(r, p) < radius) return true;
  }
  return false;
}

StateVector World::execute_transition(const StateVector& commanded, double dt) {
  if (commanded.size() != planar::kStateDim || !commanded.allFinite()) {
    throw Error(ErrorCode::invalid_argument, "commanded state must be a finite planar state");
  }
  const Vec2 from = planar::position(robot_);
  StateVector next = commanded;
  next.head<3>() += gaussian3(exec_rng_, cfg_.exec_noise);
  const Vec2 to = planar::position(next);

  const std::vector<Rect> before = footprints_;
  step_world(dt);
  const std::vector<Rect>& after = footprints_;

  // Pair footprints by index when the obstacle set is unchanged, otherwise
  // treat every footprint as static at its post-step pose.
  const bool paired = before.size() == after.size();
  const int k = cfg_.collision_substeps;
  const Vec2 robot_step = (to - from) / k;
  for (std::size_t i = 0; i < after.size() && !collided_; ++i) {
    const Rect& r1 = after[i];
    const Rect& r0 = paired ? before[i] : after[i];
    const Vec2 ob_step = (r1.center - r0.center) / k;
    // Inflate by half the relative motion per substep so that contact between
    // samples is still caught.
    const double inflate = 0.5 * (robot_step - ob_step).norm();
    for (int j = 0; j <= k; ++j) {
      const double s = static_cast<double>(j) / k;
      Rect r = r1;
      r.center = r0.center + s * (r1.center - r0.center);
      const Vec2 p = from + s * (to - from);
      if (signed_distance(r, p) < cfg_.robot_radius + inflate) {
        collided_ = true;
        break;
      }
    }
  }
  robot_ = next;
  return robot_;
}

StateVector World::measure_state() {
  measured_ = robot_;
  measured_.head<3>() += gaussian3(meas_rng_, cfg_.meas_noise);
  return measured_;
}

bool World::goal_reached(const StateVector& goal, double tol) const {
  if (!(tol > 0.0)) throw Error(ErrorCode::invalid_argument, "goal tolerance must be positive");
  return (planar::position(robot_) - planar::position(goal)).norm() <= tol;
}

// ---------------------------------------------------------------------------
// Environments

ToggleLayout toggle_layout(const EnvConfig& cfg) {
  ToggleLayout t;
  t.wall_x = 0.5 * cfg.world_size.x();
  t.lower_gap_y = 0.25 * cfg.world_size.y();
  t.upper_gap_y = 0.75 * cfg.world_size.y();
  t.gap_width = 8.0;
  return t;
}

EnvConfig full_scale_env(EnvKind kind) {
  EnvConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case EnvKind::static_grid:
      cfg.world_size = Vec2(90.0, 120.0);
      cfg.obstacle_count = 48;
      cfg.top_speed = 0.0;
      cfg.max_accel = 0.0;
      cfg.min_start_goal = 70.0;
      break;
    case EnvKind::forest:
      cfg.world_size = Vec2(90.0, 120.0);
      cfg.obstacle_count = 80;
      cfg.min_start_goal = 70.0;
      break;
    case EnvKind::patrol:
      cfg.world_size = Vec2(10.0, 40.0);
      cfg.obstacle_count = 4;
      cfg.robot_radius = 0.5;
      cfg.min_start_goal = 30.0;
      cfg.visibility_half_extent = 10.0;
      cfg.sdf_resolution = 0.1;
      break;
    case EnvKind::toggle:
    case EnvKind::scripted:
      return desk_env(kind);
  }
  return cfg;
}

EnvConfig desk_env(EnvKind kind) {
  EnvConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case EnvKind::static_grid:
      cfg.obstacle_count = 12;
      cfg.top_speed = 0.0;
      cfg.max_accel = 0.0;
      break;
    case EnvKind::forest:
      break;
    case EnvKind::patrol:
      return full_scale_env(kind);
    case EnvKind::toggle:
      cfg.world_size = Vec2(40.0, 30.0);
      cfg.obstacle_count = 0;
      cfg.top_speed = 0.0;
      cfg.max_accel = 0.0;
      cfg.toggle_time = 3.0;
      break;
    case EnvKind::scripted:
      cfg.obstacle_count = 0;
      break;
  }
  return cfg;
}

namespace {

bool endpoints_ok(const std::vector<Obstacle>& obstacles, const Vec2& p, double robot_radius, double clearance_m) {
  return clearance(obstacles, p) > robot_radius + clearance_m;
}

StateVector pose_toward(const Vec2& p, const Vec2& target) {
  const Vec2 d = target - p;
  return planar::make_state(p.x(), p.y(), std::atan2(d.y(), d.x()));
}

}  // namespace

Scenario make_env(const EnvConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(RngStream::placement)));
  Bounds bounds{Vec2::Zero(), cfg.world_size};
  std::vector<Obstacle> obstacles;
  StateVector start;
  StateVector goal;
  const double margin = cfg.robot_radius + 1.0;
  const Vec2 lo = bounds.min + Vec2::Constant(margin);
  const Vec2 hi = bounds.max - Vec2::Constant(margin);

  auto sample_endpoints = [&](const Vec2& slo, const Vec2& shi, const Vec2& glo, const Vec2& ghi, bool check_obstacles) {
    for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
      const Vec2 s = uniform_in(rng, slo, shi);
      const Vec2 g = uniform_in(rng, glo, ghi);
      if ((g - s).norm() < cfg.min_start_goal) continue;
      if (check_obstacles && (!endpoints_ok(obstacles, s, cfg.robot_radius, 1.0) ||
                              !endpoints_ok(obstacles, g, cfg.robot_radius, 1.0))) {
        continue;
      }
      start = pose_toward(s, g);
      goal = pose_toward(g, g);
      // Goal heading faces along the start-goal line.
      goal[planar::kYaw] = start[planar::kYaw];
      return;
    }
    throw Error(ErrorCode::placement, "could not place start and goal");
  };

  switch (cfg.kind) {
    case EnvKind::static_grid: {
      const int nx = std::max(1, static_cast<int>(std::floor(cfg.world_size.x() / cfg.grid_spacing + 1e-9)));
      const int ny = std::max(1, static_cast<int>(std::floor(cfg.world_size.y() / cfg.grid_spacing + 1e-9)));
      const double ox = 0.5 * (cfg.world_size.x() - (nx - 1) * cfg.grid_spacing);
      const double oy = 0.5 * (cfg.world_size.y() - (ny - 1) * cfg.grid_spacing);
      for (int iy = 0; iy < ny && static_cast<int>(obstacles.size()) < cfg.obstacle_count; ++iy) {
        for (int ix = 0; ix < nx && static_cast<int>(obstacles.size()) < cfg.obstacle_count; ++ix) {
          Obstacle ob;
          ob.footprint = Rect::square(Vec2(ox + ix * cfg.grid_spacing, oy + iy * cfg.grid_spacing), cfg.obstacle_side);
          obstacles.push_back(ob);
        }
      }
      sample_endpoints(lo, hi, lo, hi, true);
      break;
    }
    case EnvKind::forest: {
      sample_endpoints(lo, hi, lo, hi, false);
      const double h = 0.5 * cfg.obstacle_side;
      std::uniform_real_distribution<double> angle(-kPi, kPi);
      std::uniform_real_distribution<double> speed(0.0, cfg.top_speed);
      for (int i = 0; i < cfg.obstacle_count; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementRetries && !placed; ++attempt) {
          const Vec2 c = uniform_in(rng, bounds.min + Vec2::Constant(h), bounds.max - Vec2::Constant(h));
          Obstacle ob;
          ob.footprint = Rect::square(c, cfg.obstacle_side);
          const double keep = cfg.robot_radius + cfg.spawn_clearance;
          if (signed_distance(ob.footprint, planar::position(start)) <= keep ||
              signed_distance(ob.footprint, planar::position(goal)) <= keep) {
            continue;
          }
          const double a = angle(rng);
          ob.velocity = speed(rng) * Vec2(std::cos(a), std::sin(a));
          obstacles.push_back(ob);
          placed = true;
        }
        if (!placed) throw Error(ErrorCode::placement, "could not place forest obstacle");
      }
      break;
    }
    case EnvKind::patrol: {
      const double w = cfg.world_size.x();
      const double len = cfg.world_size.y();
      // Stationary blocks narrow the middle of the corridor to a passage.
      const double passage = std::max(3.0, 0.3 * w);
      const double block_w = 0.5 * (w - passage);
      for (double cx : {0.5 * block_w, w - 0.5 * block_w}) {
        Obstacle ob;
        ob.footprint = Rect::box(Vec2(cx, 0.5 * len), block_w, 2.0);
        obstacles.push_back(ob);
      }
      std::uniform_real_distribution<double> speed(0.5, 1.5);
      std::bernoulli_distribution dir(0.5);
      const double mover_w = 0.3 * w;
      for (double cy : {0.3 * len, 0.7 * len}) {
        Obstacle ob;
        ob.patrol = true;
        ob.patrol_min_x = 0.5 * mover_w;
        ob.patrol_max_x = w - 0.5 * mover_w;
        std::uniform_real_distribution<double> x0(ob.patrol_min_x, ob.patrol_max_x);
        ob.footprint = Rect::box(Vec2(x0(rng), cy), mover_w, 1.0);
        ob.velocity = Vec2((dir(rng) ? 1.0 : -1.0) * speed(rng), 0.0);
        obstacles.push_back(ob);
      }
      const double side = std::min(0.3 * w, 2.0);
      const double r = cfg.robot_radius + 0.5;
      sample_endpoints(Vec2(r, r), Vec2(w - r, r + side), Vec2(r, len - r - side), Vec2(w - r, len - r), true);
      break;
    }
    case EnvKind::toggle: {
      const ToggleLayout t = toggle_layout(cfg);
      const double wall_w = 1.0;
      const double hg = 0.5 * t.gap_width;
      const double y_far_lo = -cfg.world_size.y();
      const double y_far_hi = 2.0 * cfg.world_size.y();
      auto wall = [&](double y0, double y1) {
        Obstacle ob;
        ob.footprint = Rect::box(Vec2(t.wall_x, 0.5 * (y0 + y1)), wall_w, y1 - y0);
        obstacles.push_back(ob);
      };
      wall(y_far_lo, t.lower_gap_y - hg);
      wall(t.lower_gap_y + hg, t.upper_gap_y - hg);
      wall(t.upper_gap_y + hg, y_far_hi);
      // The upper gap starts blocked; at toggle_time the blocker moves to the lower gap.
      Obstacle upper_block;
      upper_block.footprint = Rect::box(Vec2(t.wall_x, t.upper_gap_y), wall_w, t.gap_width);
      upper_block.active_until = cfg.toggle_time;
      obstacles.push_back(upper_block);
      Obstacle lower_block;
      lower_block.footprint = Rect::box(Vec2(t.wall_x, t.lower_gap_y), wall_w, t.gap_width);
      lower_block.active_from = cfg.toggle_time;
      obstacles.push_back(lower_block);
      std::uniform_real_distribution<double> jitter(-1.0, 1.0);
      const double mid = t.mid_y();
      const Vec2 s(3.0 + jitter(rng), mid + jitter(rng));
      const Vec2 g(cfg.world_size.x() - 3.0 + jitter(rng), mid + jitter(rng));
      start = pose_toward(s, g);
      goal = pose_toward(g, g);
      goal[planar::kYaw] = start[planar::kYaw];
      break;
    }
    case EnvKind::scripted: {
      obstacles = cfg.scene->obstacles;
      start = cfg.scene->start;
      goal = cfg.scene->goal;
      break;
    }
  }
  World world(cfg, bounds, std::move(obstacles), start, seed);
  world.set_scene_endpoints(start, goal);
  return Scenario{std::move(world), start, goal};
}

}  // namespace jist
