#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jist/sdf.hpp"
#include "jist/types.hpp"

namespace jist {

enum class EnvKind { static_grid, forest, patrol, toggle, scripted };

const char* to_string(EnvKind kind);
EnvKind env_kind_from_string(const std::string& name);

struct Obstacle {
  Rect footprint;
  Vec2 velocity{0.0, 0.0};
  /// Patrol movers bounce horizontally between these center x limits.
  bool patrol = false;
  double patrol_min_x = 0.0;
  double patrol_max_x = 0.0;
  /// Scripted presence interval [active_from, active_until).
  double active_from = -std::numeric_limits<double>::infinity();
  double active_until = std::numeric_limits<double>::infinity();

  bool active(double t) const { return t >= active_from && t < active_until; }
};

/// Per-axis Gaussian pose noise on [x m, y m, yaw rad].
struct PoseNoise {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d sigma = Eigen::Vector3d::Constant(0.03);
};

struct ScriptedScene {
  std::vector<Obstacle> obstacles;
  StateVector start;
  StateVector goal;
};

struct EnvConfig {
  EnvKind kind = EnvKind::forest;
  Vec2 world_size{45.0, 60.0};
  int obstacle_count = 30;
  double obstacle_side = 6.0;
  double grid_spacing = 15.0;
  double top_speed = 1.5;
  double max_accel = 0.6;
  double robot_radius = 1.5;
  PoseNoise exec_noise;
  PoseNoise meas_noise;
  double min_start_goal = 35.0;
  /// Free space kept around start and goal when placing obstacles.
  double spawn_clearance = 3.0;
  int collision_substeps = 10;
  double sdf_resolution = 0.25;
  double visibility_half_extent = 15.0;
  /// Time at which the toggle world swaps its open corridor.
  double toggle_time = 6.0;
  /// Only used by EnvKind::scripted.
  std::optional<ScriptedScene> scene;

  void validate() const;
};

/// Per-step obstacle footprints, for replay and plotting.
struct WorldScript {
  struct Frame {
    double time = 0.0;
    std::vector<Rect> obstacles;
  };

  Bounds bounds;
  double robot_radius = 0.0;
  StateVector start;
  StateVector goal;
  std::vector<Frame> frames;

  void write_text(std::ostream& os) const;
  static WorldScript read_text(std::istream& is);
  /// FNV-1a over the text form of the first `max_frames` frames (all if 0).
  std::uint64_t hash(std::size_t max_frames = 0) const;
};

/// Derives an independent 64-bit seed for a named stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class RngStream : std::uint64_t { placement = 0, world = 1, execution = 2, measurement = 3, planner = 4 };

/**
 * Planar world with moving obstacles, stochastic execution and noisy pose
 * measurement. Obstacle motion draws only from the world stream, so the
 * obstacle trajectory for a seed does not depend on what the robot does.
 */
class World {
 public:
  World(EnvConfig cfg, Bounds bounds, std::vector<Obstacle> obstacles, StateVector robot, std::uint64_t seed);

  double time() const { return time_; }
  const EnvConfig& config() const { return cfg_; }
  const Bounds& bounds() const { return bounds_; }
  const StateVector& robot_true() const { return robot_; }
  const StateVector& last_measurement() const { return measured_; }
  bool collided() const { return collided_; }
  /// Ground truth for tests and plotting; planners only see observe_sdf().
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  /// Footprints present at the current time.
  const std::vector<Rect>& footprints() const { return footprints_; }

  void step_world(double dt);

  /// SDF over the visibility window centered at the last measured position.
  SdfGrid observe_sdf() const;
  SdfGrid observe_sdf(const Vec2& center) const;

  /// Moves the robot to the commanded pose plus execution noise, advances the
  /// world by dt and checks the sweep for collision.
  StateVector execute_transition(const StateVector& commanded, double dt);
  StateVector measure_state();
  bool goal_reached(const StateVector& goal, double tol) const;

  /// True when a disk at `p` overlaps any current footprint.
  bool in_collision(const Vec2& p, double radius) const;

  void set_recording(bool on);
  const WorldScript& script() const { return script_; }
  void set_scene_endpoints(const StateVector& start, const StateVector& goal);
  /// Replace obstacle dynamics with recorded footprints.
  void load_replay(WorldScript script);

  /// Semi-implicit Euler step with speed clamp and elastic reflection at bounds.
  static void integrate_obstacle(Obstacle& ob, const Vec2& accel, double dt, const Bounds& bounds, double top_speed);

 private:
  void refresh_footprints();
  void record_frame();

  EnvConfig cfg_;
  Bounds bounds_;
  std::vector<Obstacle> obstacles_;
  std::vector<Rect> footprints_;
  StateVector robot_;
  StateVector measured_;
  double time_ = 0.0;
  bool collided_ = false;
  std::mt19937_64 world_rng_;
  std::mt19937_64 exec_rng_;
  std::mt19937_64 meas_rng_;
  bool recording_ = false;
  WorldScript script_;
  std::optional<WorldScript> replay_;
  std::size_t replay_frame_ = 0;
};

struct Scenario {
  World world;
  StateVector start;
  StateVector goal;
};

/// Full-scale environment defaults (static 90x120 m with 48 obstacles, forest
/// with 80 movers, 10x40 m patrol corridor).
EnvConfig full_scale_env(EnvKind kind);
/// Reduced defaults used by the shipped configs and the acceptance suite.
EnvConfig desk_env(EnvKind kind);

/// Builds the world, start and goal for `cfg` deterministically from `seed`.
Scenario make_env(const EnvConfig& cfg, std::uint64_t seed);

/// Corridor geometry of the toggle world: wall position and the y-centers of
/// the two gaps (lower one open first).
struct ToggleLayout {
  double wall_x = 20.0;
  double lower_gap_y = 8.0;
  double upper_gap_y = 22.0;
  double gap_width = 6.0;
  double mid_y() const { return 0.5 * (lower_gap_y + upper_gap_y); }
};
ToggleLayout toggle_layout(const EnvConfig& cfg);

}  // namespace jist
