#include "jist/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace jist {

using nlohmann::json;

const char* to_string(PlannerKind kind) {
  switch (kind) {
    case PlannerKind::jist: return "jist";
    case PlannerKind::opt: return "opt";
    case PlannerKind::samp: return "samp";
  }
  return "unknown";
}

PlannerKind planner_kind_from_string(const std::string& name) {
  if (name == "jist") return PlannerKind::jist;
  if (name == "opt") return PlannerKind::opt;
  if (name == "samp") return PlannerKind::samp;
  throw Error(ErrorCode::config, "unknown planner '" + name + "'");
}

const char* to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::none: return "none";
    case AblationAxis::obstacles: return "obstacles";
    case AblationAxis::speed: return "speed";
    case AblationAxis::noise: return "noise";
    case AblationAxis::budget: return "budget";
  }
  return "unknown";
}

AblationAxis axis_from_string(const std::string& name) {
  if (name == "none") return AblationAxis::none;
  if (name == "obstacles") return AblationAxis::obstacles;
  if (name == "speed") return AblationAxis::speed;
  if (name == "noise") return AblationAxis::noise;
  if (name == "budget") return AblationAxis::budget;
  throw Error(ErrorCode::config, "unknown ablation axis '" + name + "'");
}

void BenchmarkConfig::check() const {
  env.validate();
  factors.check();
  PlannerConfig j = jist;
  j.factors = factors;
  j.check();
  ChainConfig o = opt;
  o.factors = factors;
  o.check();
  TreeConfig s = samp;
  s.factors = factors;
  s.check();
  if (planners.empty()) throw Error(ErrorCode::config, "no planners selected");
  if (axis != AblationAxis::none && values.empty()) throw Error(ErrorCode::config, "ablation axis needs values");
}

BenchmarkConfig default_benchmark(EnvKind kind) {
  BenchmarkConfig cfg;
  cfg.env = desk_env(kind);
  if (kind == EnvKind::static_grid) {
    // A stiff sideways-motion term stalls the chain optimizer on this grid.
    cfg.factors.sigma_nonholonomic = 1.0;
  }
  if (kind == EnvKind::forest) {
    // Moving obstacles need a wider berth than the static grid's passages allow.
    cfg.factors.obstacle_eps = 3.0;
    cfg.trials = 20;
  }
  if (kind == EnvKind::patrol) {
    cfg.jist.sample_window = 5.0;
    cfg.samp.sample_window = 5.0;
    cfg.factors.obstacle_eps = 0.5;
  }
  return cfg;
}

BenchmarkConfig with_axis(const BenchmarkConfig& cfg, AblationAxis axis, double value) {
  BenchmarkConfig out = cfg;
  switch (axis) {
    case AblationAxis::none:
      break;
    case AblationAxis::obstacles:
      if (value < 0.0) throw Error(ErrorCode::config, "obstacle count must be >= 0");
      out.env.obstacle_count = static_cast<int>(std::lround(value));
      break;
    case AblationAxis::speed:
      out.env.top_speed = value;
      break;
    case AblationAxis::noise:
      out.env.exec_noise.sigma.setConstant(value);
      out.env.meas_noise.sigma.setConstant(value);
      break;
    case AblationAxis::budget: {
      if (value < 2.0) throw Error(ErrorCode::config, "budget must be >= 2");
      const auto n = static_cast<std::size_t>(std::lround(value));
      out.jist.node_budget = n;
      out.opt.horizon = n;
      out.samp.node_budget = n;
      break;
    }
  }
  out.axis = AblationAxis::none;
  out.values.clear();
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j, Eigen::Index n, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != n) {
    throw Error(ErrorCode::config, std::string(what) + " needs " + std::to_string(n) + " entries");
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), n);
}

json noise_json(const PoseNoise& n) { return {{"mean", vec_json(n.mean)}, {"sigma", vec_json(n.sigma)}}; }

PoseNoise noise_from(const json& j) {
  PoseNoise n;
  n.mean = vec_from(j.at("mean"), 3, "noise mean");
  n.sigma = vec_from(j.at("sigma"), 3, "noise sigma");
  return n;
}

json solver_json(const GaussNewtonOptions& s) {
  return {{"max_iters", s.max_iters}, {"rel_tol", s.rel_tol}, {"abs_tol", s.abs_tol}};
}

GaussNewtonOptions solver_from(const json& j) {
  GaussNewtonOptions s;
  s.max_iters = j.at("max_iters").get<std::size_t>();
  s.rel_tol = j.at("rel_tol").get<double>();
  s.abs_tol = j.at("abs_tol").get<double>();
  return s;
}

json to_json_doc(const BenchmarkConfig& c) {
  json j;
  const EnvConfig& e = c.env;
  j["env"] = {{"kind", to_string(e.kind)},
              {"world_size", {e.world_size.x(), e.world_size.y()}},
              {"obstacle_count", e.obstacle_count},
              {"obstacle_side", e.obstacle_side},
              {"grid_spacing", e.grid_spacing},
              {"top_speed", e.top_speed},
              {"max_accel", e.max_accel},
              {"robot_radius", e.robot_radius},
              {"exec_noise", noise_json(e.exec_noise)},
              {"meas_noise", noise_json(e.meas_noise)},
              {"min_start_goal", e.min_start_goal},
              {"spawn_clearance", e.spawn_clearance},
              {"collision_substeps", e.collision_substeps},
              {"sdf_resolution", e.sdf_resolution},
              {"visibility_half_extent", e.visibility_half_extent},
              {"toggle_time", e.toggle_time}};
  const FactorSettings& f = c.factors;
  j["factors"] = {{"qc", vec_json(f.qc)},
                  {"sigma_current", f.sigma_current},
                  {"sigma_obstacle", f.sigma_obstacle},
                  {"obstacle_eps", f.obstacle_eps},
                  {"n_interp", f.n_interp},
                  {"sigma_goal", f.sigma_goal},
                  {"sigma_limit", f.sigma_limit},
                  {"limit_eps", f.limit_eps},
                  {"limit_mode", f.limit_mode == LimitMode::verbatim ? "verbatim" : "safety"},
                  {"max_speed", f.max_speed},
                  {"max_yaw_rate", f.max_yaw_rate},
                  {"sigma_nonholonomic", f.sigma_nonholonomic}};
  const PlannerConfig& p = c.jist;
  j["jist"] = {{"node_budget", p.node_budget},         {"extend_step", p.extend_step},
               {"dt", p.dt},                           {"sample_window", p.sample_window},
               {"goal_tolerance", p.goal_tolerance},   {"max_iterations", p.max_iterations},
               {"solver", solver_json(p.solver)}};
  const ChainConfig& o = c.opt;
  j["opt"] = {{"horizon", o.horizon},
              {"dt", o.dt},
              {"nominal_speed", o.nominal_speed},
              {"goal_tolerance", o.goal_tolerance},
              {"max_iterations", o.max_iterations},
              {"solver", solver_json(o.solver)}};
  const TreeConfig& s = c.samp;
  j["samp"] = {{"node_budget", s.node_budget},
               {"extend_step", s.extend_step},
               {"sample_window", s.sample_window},
               {"rewire_radius", s.rewire_radius},
               {"goal_weight", s.goal_weight},
               {"collision_check_step", s.collision_check_step},
               {"dt", s.dt},
               {"goal_tolerance", s.goal_tolerance},
               {"max_iterations", s.max_iterations},
               {"attempt_factor", s.attempt_factor}};
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  std::vector<std::string> planners;
  for (PlannerKind k : c.planners) planners.emplace_back(to_string(k));
  j["planners"] = planners;
  j["axis"] = to_string(c.axis);
  j["values"] = c.values;
  return j;
}

BenchmarkConfig from_json_doc(const json& j) {
  BenchmarkConfig c;
  const json& e = j.at("env");
  c.env.kind = env_kind_from_string(e.at("kind").get<std::string>());
  c.env.world_size = vec_from(e.at("world_size"), 2, "world_size");
  c.env.obstacle_count = e.at("obstacle_count").get<int>();
  c.env.obstacle_side = e.at("obstacle_side").get<double>();
  c.env.grid_spacing = e.at("grid_spacing").get<double>();
  c.env.top_speed = e.at("top_speed").get<double>();
  c.env.max_accel = e.at("max_accel").get<double>();
  c.env.robot_radius = e.at("robot_radius").get<double>();
  c.env.exec_noise = noise_from(e.at("exec_noise"));
  c.env.meas_noise = noise_from(e.at("meas_noise"));
  c.env.min_start_goal = e.at("min_start_goal").get<double>();
  c.env.spawn_clearance = e.at("spawn_clearance").get<double>();
  c.env.collision_substeps = e.at("collision_substeps").get<int>();
  c.env.sdf_resolution = e.at("sdf_resolution").get<double>();
  c.env.visibility_half_extent = e.at("visibility_half_extent").get<double>();
  c.env.toggle_time = e.at("toggle_time").get<double>();

  const json& f = j.at("factors");
  c.factors.qc = vec_from(f.at("qc"), planar::kDof, "qc");
  c.factors.sigma_current = f.at("sigma_current").get<double>();
  c.factors.sigma_obstacle = f.at("sigma_obstacle").get<double>();
  c.factors.obstacle_eps = f.at("obstacle_eps").get<double>();
  c.factors.n_interp = f.at("n_interp").get<int>();
  c.factors.sigma_goal = f.at("sigma_goal").get<double>();
  c.factors.sigma_limit = f.at("sigma_limit").get<double>();
  c.factors.limit_eps = f.at("limit_eps").get<double>();
  const auto mode = f.at("limit_mode").get<std::string>();
  if (mode != "verbatim" && mode != "safety") throw Error(ErrorCode::config, "limit_mode must be verbatim or safety");
  c.factors.limit_mode = mode == "verbatim" ? LimitMode::verbatim : LimitMode::safety;
  c.factors.max_speed = f.at("max_speed").get<double>();
  c.factors.max_yaw_rate = f.at("max_yaw_rate").get<double>();
  c.factors.sigma_nonholonomic = f.at("sigma_nonholonomic").get<double>();

  const json& p = j.at("jist");
  c.jist.node_budget = p.at("node_budget").get<std::size_t>();
  c.jist.extend_step = p.at("extend_step").get<double>();
  c.jist.dt = p.at("dt").get<double>();
  c.jist.sample_window = p.at("sample_window").get<double>();
  c.jist.goal_tolerance = p.at("goal_tolerance").get<double>();
  c.jist.max_iterations = p.at("max_iterations").get<std::size_t>();
  c.jist.solver = solver_from(p.at("solver"));

  const json& o = j.at("opt");
  c.opt.horizon = o.at("horizon").get<std::size_t>();
  c.opt.dt = o.at("dt").get<double>();
  c.opt.nominal_speed = o.at("nominal_speed").get<double>();
  c.opt.goal_tolerance = o.at("goal_tolerance").get<double>();
  c.opt.max_iterations = o.at("max_iterations").get<std::size_t>();
  c.opt.solver = solver_from(o.at("solver"));

  const json& s = j.at("samp");
  c.samp.node_budget = s.at("node_budget").get<std::size_t>();
  c.samp.extend_step = s.at("extend_step").get<double>();
  c.samp.sample_window = s.at("sample_window").get<double>();
  c.samp.rewire_radius = s.at("rewire_radius").get<double>();
  c.samp.goal_weight = s.at("goal_weight").get<double>();
  c.samp.collision_check_step = s.at("collision_check_step").get<double>();
  c.samp.dt = s.at("dt").get<double>();
  c.samp.goal_tolerance = s.at("goal_tolerance").get<double>();
  c.samp.max_iterations = s.at("max_iterations").get<std::size_t>();
  c.samp.attempt_factor = s.at("attempt_factor").get<std::size_t>();

  c.trials = j.at("trials").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.planners.clear();
  for (const auto& name : j.at("planners")) c.planners.push_back(planner_kind_from_string(name.get<std::string>()));
  c.axis = axis_from_string(j.at("axis").get<std::string>());
  c.values = j.at("values").get<std::vector<double>>();
  c.check();
  return c;
}

// Overlay `patch` onto `base`; every patched key must already exist.
void merge_strict(json& base, const json& patch, const std::string& prefix) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw Error(ErrorCode::config, "unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && it->is_object()) {
      merge_strict(slot, *it, key);
    } else {
      slot = *it;
    }
  }
}

BenchmarkConfig parse_doc(const json& j) {
  try {
    EnvKind kind = EnvKind::forest;
    if (j.contains("env") && j["env"].contains("kind")) {
      kind = env_kind_from_string(j["env"]["kind"].get<std::string>());
    }
    json doc = to_json_doc(default_benchmark(kind));
    merge_strict(doc, j, "");
    return from_json_doc(doc);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("bad config: ") + e.what());
  }
}

}  // namespace

std::string config_to_json(const BenchmarkConfig& cfg) { return to_json_doc(cfg).dump(2) + "\n"; }

BenchmarkConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::config, "config must be a JSON object");
  return parse_doc(j);
}

BenchmarkConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const BenchmarkConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write config " + path.string());
  out << config_to_json(cfg);
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

void set_param(BenchmarkConfig& cfg, const std::string& key, const std::string& value) {
  json doc = to_json_doc(cfg);
  json* slot = &doc;
  std::stringstream ks(key);
  std::string part;
  while (std::getline(ks, part, '.')) {
    if (!slot->is_object() || !slot->contains(part)) throw Error(ErrorCode::config, "unknown config key '" + key + "'");
    slot = &(*slot)[part];
  }
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;
  }
  *slot = parsed;
  try {
    cfg = from_json_doc(doc);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config, "bad value for '" + key + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Trials

std::unique_ptr<Planner> make_planner(PlannerKind kind, const BenchmarkConfig& cfg, std::uint64_t seed) {
  const RobotShape shape = RobotShape::disk(cfg.env.robot_radius);
  const std::uint64_t stream = static_cast<std::uint64_t>(RngStream::planner) + 16 * static_cast<std::uint64_t>(kind);
  switch (kind) {
    case PlannerKind::jist: {
      PlannerConfig p = cfg.jist;
      p.factors = cfg.factors;
      p.rng_seed = derive_seed(seed, stream);
      return std::make_unique<JistPlanner>(p, shape);
    }
    case PlannerKind::opt: {
      ChainConfig o = cfg.opt;
      o.factors = cfg.factors;
      return std::make_unique<OptPlanner>(o, shape);
    }
    case PlannerKind::samp: {
      TreeConfig s = cfg.samp;
      s.factors = cfg.factors;
      s.rng_seed = derive_seed(seed, stream);
      return std::make_unique<SampPlanner>(s, shape);
    }
  }
  throw Error(ErrorCode::config, "unknown planner");
}

namespace {

TrialResult finish_trial(PlannerKind kind, std::uint64_t seed, World& world, const StateVector& start,
                         const StateVector& goal, Planner& planner, const TrialOptions& options) {
  world.set_recording(true);
  TrialResult r;
  r.planner = kind;
  r.seed = seed;
  r.world_hash = world.script().hash(1);
  EpisodeOptions eo;
  eo.trace = options.trace;
  eo.observer = options.observer;
  const EpisodeResult ep = run_episode(world, planner, start, goal, eo);
  r.outcome = ep.outcome;
  r.execution_time = ep.execution_time;
  r.mean_compute = ep.mean_compute();
  r.normalized_distance = ep.normalized_distance;
  r.iterations = ep.iterations;
  r.compute_seconds = ep.compute_seconds;
  r.error = ep.error;
  if (options.on_finish) options.on_finish(world);
  return r;
}

}  // namespace

TrialResult run_trial(PlannerKind kind, const BenchmarkConfig& cfg, std::uint64_t seed, const TrialOptions& options) {
  cfg.check();
  Scenario sc = make_env(cfg.env, seed);
  auto planner = make_planner(kind, cfg, seed);
  return finish_trial(kind, seed, sc.world, sc.start, sc.goal, *planner, options);
}

TrialResult run_replay_trial(PlannerKind kind, const BenchmarkConfig& cfg, const WorldScript& script,
                             std::uint64_t seed, const TrialOptions& options) {
  cfg.check();
  EnvConfig env = cfg.env;
  env.robot_radius = script.robot_radius;
  World world(env, script.bounds, {}, script.start, seed);
  world.set_scene_endpoints(script.start, script.goal);
  world.load_replay(script);
  BenchmarkConfig local = cfg;
  local.env = env;
  auto planner = make_planner(kind, local, seed);
  return finish_trial(kind, seed, world, script.start, script.goal, *planner, options);
}

MetricsRow aggregate(PlannerKind planner, std::optional<double> axis_value, const std::vector<TrialResult>& trials) {
  MetricsRow row;
  row.planner = planner;
  row.axis_value = axis_value;
  row.n_trials = trials.size();
  std::size_t successes = 0;
  double exec = 0.0;
  double dist = 0.0;
  double compute = 0.0;
  std::size_t iterations = 0;
  for (const auto& t : trials) {
    for (double c : t.compute_seconds) compute += c;
    iterations += t.compute_seconds.size();
    if (t.outcome != Outcome::success) continue;
    ++successes;
    exec += t.execution_time;
    if (t.normalized_distance) dist += *t.normalized_distance;
  }
  if (!trials.empty()) row.success = static_cast<double>(successes) / static_cast<double>(trials.size());
  if (successes) {
    row.exec_time = exec / static_cast<double>(successes);
    row.norm_dist = dist / static_cast<double>(successes);
  }
  if (iterations) row.compute_time = compute / static_cast<double>(iterations);
  return row;
}

MetricsTable run_benchmark(const BenchmarkConfig& cfg, const BenchmarkOptions& options) {
  cfg.check();
  std::vector<std::optional<double>> cells;
  if (cfg.axis == AblationAxis::none) {
    cells.push_back(std::nullopt);
  } else {
    for (double v : cfg.values) cells.push_back(v);
  }
  if (options.trace_dir) std::filesystem::create_directories(*options.trace_dir);

  MetricsTable table;
  for (const auto& cell : cells) {
    const BenchmarkConfig local = cell ? with_axis(cfg, cfg.axis, *cell) : cfg;
    std::map<PlannerKind, std::vector<TrialResult>> results;
    for (std::size_t i = 0; i < cfg.trials; ++i) {
      const std::uint64_t seed = cfg.seed + i;
      for (PlannerKind kind : cfg.planners) {
        TrialOptions to;
        std::ofstream trace;
        if (options.trace_dir) {
          char name[128];
          std::snprintf(name, sizeof name, "%s_%s_%llu.trace", to_string(kind),
                        cell ? std::to_string(*cell).c_str() : "base", static_cast<unsigned long long>(seed));
          const auto path = *options.trace_dir / name;
          trace.open(path);
          if (!trace) throw Error(ErrorCode::io, "cannot write trace " + path.string());
          to.trace = &trace;
        }
        TrialResult r = run_trial(kind, local, seed, to);
        if (options.on_trial) options.on_trial(r);
        results[kind].push_back(std::move(r));
      }
    }
    for (auto& [kind, trials] : results) table.push_back(aggregate(kind, cell, trials));
  }
  std::sort(table.begin(), table.end(), [](const MetricsRow& a, const MetricsRow& b) {
    const std::string na = to_string(a.planner);
    const std::string nb = to_string(b.planner);
    if (na != nb) return na < nb;
    return a.axis_value.value_or(0.0) < b.axis_value.value_or(0.0);
  });
  return table;
}

void write_csv(const MetricsTable& table, std::ostream& os) {
  os << "planner,axis_value,success,exec_time_s,compute_time_s,norm_dist,n_trials\n";
  auto num = [](std::optional<double> v) {
    if (!v) return std::string("-");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return std::string(buf);
  };
  for (const auto& r : table) {
    os << to_string(r.planner) << ',' << num(r.axis_value) << ',' << num(r.success) << ',' << num(r.exec_time) << ','
       << num(r.compute_time) << ',' << num(r.norm_dist) << ',' << r.n_trials << '\n';
  }
}

void write_csv(const MetricsTable& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  write_csv(table, out);
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

}  // namespace jist
