#include <catch_amalgamated.hpp>

#include <map>
#include <set>

#include "jist/bench.hpp"
#include "jist/jist_planner.hpp"
#include "test_util.hpp"

using namespace jist;

namespace {

PlannerConfig small_config(std::size_t budget = 12) {
  PlannerConfig cfg;
  cfg.node_budget = budget;
  cfg.rng_seed = 17;
  return cfg;
}

std::shared_ptr<const SdfGrid> empty_sdf(const Vec2& center = Vec2::Zero()) {
  return std::make_shared<const SdfGrid>(build_sdf(std::span<const Rect>{}, Window{center, 15.0}, 0.5));
}

EnvConfig scripted_env(std::vector<Obstacle> obstacles, StateVector start, StateVector goal) {
  EnvConfig cfg = desk_env(EnvKind::scripted);
  cfg.world_size = Vec2(60.0, 40.0);
  cfg.exec_noise.sigma.setZero();
  cfg.meas_noise.sigma.setZero();
  cfg.scene = ScriptedScene{std::move(obstacles), std::move(start), std::move(goal)};
  return cfg;
}

// Names of the factors attached to `id` that touch only `id`.
std::multiset<std::string> unary_names(const FactorGraph& g, VariableId id) {
  std::multiset<std::string> out;
  for (FactorId f : g.factors_of(id)) {
    if (g.factor(f).vars.size() == 1) out.insert(std::string(g.factor(f).factor->name()));
  }
  return out;
}

// Structural invariants of a planner graph: a valid tree, the root carries
// only the current-state factor, every other state carries the per-node
// factor set and its parent edge carries the GP prior plus n_interp
// interpolated obstacle factors.
void check_planner_graph(const FactorGraph& g, int n_interp) {
  g.validate();
  const VariableId root = g.root();
  CHECK(unary_names(g, root) == std::multiset<std::string>{"current"});
  const std::multiset<std::string> node_set{"goal", "limit", "nonholonomic", "obstacle"};
  std::size_t factor_count = 1;
  for (VariableId v : g.variable_ids()) {
    if (v == root) continue;
    CHECK(unary_names(g, v) == node_set);
    std::multiset<std::string> edge;
    for (FactorId f : g.factors_of(v)) {
      const auto& e = g.factor(f);
      // Edges into `v`; the ones toward its children are checked there.
      if (e.vars.size() == 2 && e.vars[1] == v) {
        CHECK(e.vars[0] == *g.parent(v));
        edge.insert(std::string(e.factor->name()));
      }
    }
    CHECK(edge.count("gp_prior") == 1);
    CHECK(edge.count("interp_obstacle") == static_cast<std::size_t>(n_interp));
    factor_count += 4 + 1 + static_cast<std::size_t>(n_interp);
  }
  CHECK(g.num_factors() == factor_count);
}

// Leaf scores by explicit enumeration: factors whose variables all lie on the path.
std::map<VariableId, double> enumerate_leaf_scores(const FactorGraph& g) {
  std::map<VariableId, double> out;
  for (VariableId leaf : g.leaves()) {
    const auto path = g.path_to(leaf);
    const std::set<VariableId> on(path.begin(), path.end());
    double sum = 0.0;
    for (const auto& [fid, e] : g.factors()) {
      bool all = true;
      for (VariableId v : e.vars) all = all && on.count(v);
      if (all) sum += g.factor_cost(fid);
    }
    out[leaf] = sum / static_cast<double>(path.size() - 1);
  }
  return out;
}

std::shared_ptr<test::LinearFactor> scalar_cost(double cost) {
  // 0.5 * h^2 = cost with h = -m and theta = 0.
  Eigen::VectorXd m(1);
  m[0] = -std::sqrt(2.0 * cost);
  return std::make_shared<test::LinearFactor>(std::vector<Eigen::MatrixXd>{Eigen::MatrixXd::Zero(1, 6)}, m,
                                              Eigen::MatrixXd::Identity(1, 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Sampling and extension

TEST_CASE("random_sample", "[jist][sample]") {
  const StateVector cur = planar::make_state(20.0, 30.0, 0.4, 1.0, 1.0, 0.1);
  const Bounds bounds{Vec2::Zero(), Vec2(45.0, 60.0)};
  PlannerConfig cfg;

  SECTION("zero window") {
    cfg.sample_window = 0.0;
    std::mt19937_64 rng(1);
    const StateVector s = random_sample(cur, cfg, bounds, rng);
    CHECK(planar::position(s) == planar::position(cur));
  }
  SECTION("uniform statistics") {
    cfg.sample_window = 10.0;
    std::mt19937_64 rng(2);
    const int n = 10000;
    Vec2 sum = Vec2::Zero();
    for (int i = 0; i < n; ++i) {
      const StateVector s = random_sample(cur, cfg, bounds, rng);
      CHECK(s.tail(3).isZero(0.0));
      CHECK(std::abs(s[planar::kYaw] - cur[planar::kYaw]) <= std::numbers::pi);
      CHECK((planar::position(s) - planar::position(cur)).cwiseAbs().maxCoeff() <= 10.0);
      sum += planar::position(s);
    }
    const double sigma_mean = 10.0 / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));
    CHECK((sum / n - planar::position(cur)).cwiseAbs().maxCoeff() <= 3.0 * sigma_mean);
  }
  SECTION("clipped to bounds") {
    cfg.sample_window = 10.0;
    std::mt19937_64 rng(3);
    const StateVector corner = planar::make_state(1.0, 1.0, 0.0);
    for (int i = 0; i < 500; ++i) CHECK(bounds.contains(planar::position(random_sample(corner, cfg, bounds, rng))));
  }
  SECTION("fixed seed repeats") {
    std::mt19937_64 a(9);
    std::mt19937_64 b(9);
    for (int i = 0; i < 20; ++i) CHECK(random_sample(cur, cfg, bounds, a) == random_sample(cur, cfg, bounds, b));
  }
}

TEST_CASE("nearest_neighbour", "[jist][nearest]") {
  FactorGraph g;
  const VariableId r = g.add_variable(std::nullopt, planar::make_state(0, 0, 0));
  CHECK(nearest_neighbour(g, planar::make_state(50, 50, 0)) == r);
  const VariableId far = g.add_variable(r, planar::make_state(10, 0, 0));
  CHECK(nearest_neighbour(g, planar::make_state(1, 0, 0)) == r);
  CHECK(nearest_neighbour(g, planar::make_state(9, 0, 0)) == far);
  // Equidistant: smallest id wins.
  CHECK(nearest_neighbour(g, planar::make_state(5, 3, 0)) == r);
  // Only position matters.
  g.add_variable(r, planar::make_state(0.5, 0, 3.0, 9, 9, 9));
  CHECK(nearest_neighbour(g, planar::make_state(0.6, 0, 0)) == 2);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int trial = 0; trial < 20; ++trial) {
    FactorGraph t;
    std::vector<VariableId> ids{t.add_variable(std::nullopt, planar::make_state(u(rng), u(rng), 0))};
    for (int i = 0; i < 30; ++i) ids.push_back(t.add_variable(ids[i / 2], planar::make_state(u(rng), u(rng), u(rng))));
    for (int k = 0; k < 20; ++k) {
      const StateVector q = planar::make_state(u(rng), u(rng), 0);
      VariableId best = ids[0];
      for (VariableId id : ids) {
        if ((planar::position(t.value(id)) - planar::position(q)).norm() <
            (planar::position(t.value(best)) - planar::position(q)).norm()) {
          best = id;
        }
      }
      CHECK(nearest_neighbour(t, q) == best);
    }
  }
}

TEST_CASE("extend_state", "[jist][extend]") {
  PlannerConfig cfg;
  cfg.extend_step = 1.0;
  cfg.dt = 0.5;
  const StateVector near = planar::make_state(0, 0, 0);
  const StateVector close = extend_state(near, planar::make_state(0.3, 0.4, 2.0), cfg);
  CHECK(planar::position(close).isApprox(Vec2(0.3, 0.4)));
  const StateVector clamped = extend_state(near, planar::make_state(10, 0, 0), cfg);
  CHECK(planar::position(clamped).isApprox(Vec2(1.0, 0.0)));
  CHECK(clamped[planar::kVx] == Catch::Approx(1.0 / cfg.dt));
  CHECK(clamped[planar::kVy] == 0.0);

  // Heading unwrapped near the parent yaw.
  const StateVector turned = planar::make_state(0, 0, 3.0);
  const StateVector back = extend_state(turned, planar::make_state(-1, -0.1, 0), cfg);
  CHECK(std::abs(back[planar::kYaw] - 3.0) < std::numbers::pi);
  CHECK(back[planar::kYawRate] == Catch::Approx((back[planar::kYaw] - 3.0) / cfg.dt));

  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const StateVector a = planar::make_state(0, 0, 0) + test::random_vector(6, rng, 5.0);
    const StateVector b = planar::make_state(0, 0, 0) + test::random_vector(6, rng, 5.0);
    const StateVector n = extend_state(a, b, cfg);
    const Vec2 disp = planar::position(n) - planar::position(a);
    CHECK((Vec2(n[planar::kVx], n[planar::kVy]) * cfg.dt - disp).norm() <= 1e-12);
    CHECK(disp.norm() <= cfg.extend_step + 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Growth and factors

TEST_CASE("grow fills the budget with a tree", "[jist][grow]") {
  JistPlanner p(small_config(10), RobotShape::disk(1.0));
  p.reset(planar::make_state(5, 5, 0), planar::make_state(40, 40, 0), Bounds{Vec2::Zero(), Vec2(45, 60)});
  CHECK(p.graph().size() == 1);
  CHECK(p.grow() == 9);
  CHECK(p.graph().size() == 10);
  CHECK(p.grow() == 0);
  check_planner_graph(p.graph(), p.config().factors.n_interp);
  for (VariableId v : p.graph().variable_ids()) {
    if (v == p.graph().root()) continue;
    const Vec2 a = planar::position(p.graph().value(*p.graph().parent(v)));
    const Vec2 b = planar::position(p.graph().value(v));
    CHECK((b - a).norm() <= p.config().extend_step + 1e-12);
  }
}

TEST_CASE("each edge adds n_interp + 5 factors", "[jist][factors]") {
  for (int n_interp : {1, 3, 5}) {
    PlannerConfig cfg = small_config(2);
    cfg.factors.n_interp = n_interp;
    JistPlanner p(cfg, RobotShape::disk(1.0));
    p.reset(planar::make_state(5, 5, 0), planar::make_state(40, 40, 0), Bounds{Vec2::Zero(), Vec2(45, 60)});
    const std::size_t before = p.graph().num_factors();
    p.grow();
    CHECK(p.graph().num_factors() - before == static_cast<std::size_t>(n_interp) + 5);
    CHECK(p.factors().factors_per_edge() == static_cast<std::size_t>(n_interp) + 5);
  }
}

TEST_CASE("goal noise follows the measured state", "[jist][factors]") {
  PlannerConfig cfg = small_config(6);
  JistPlanner p(cfg, RobotShape::disk(1.0));
  const StateVector start = planar::make_state(0, 0, 0);
  const StateVector goal = planar::make_state(20, 0, 0);
  p.reset(start, goal, Bounds{Vec2(-30, -30), Vec2(30, 30)});
  auto goal_info = [&] {
    for (const auto& [fid, e] : p.graph().factors()) {
      if (e.factor->name() == "goal") return e.factor->information()(0, 0);
    }
    return 0.0;
  };
  const PlanStep step = p.plan(empty_sdf());
  const double first = goal_info();
  CHECK(first == Catch::Approx(1.0 / (cfg.factors.sigma_goal * cfg.factors.sigma_goal)));
  const StateVector measured = planar::make_state(10, 0, 0);
  p.commit(step, measured);
  const double expected = 1.0 / goal_cov_scale(measured, start, goal, cfg.factors.sigma_goal).sigma[0] /
                          goal_cov_scale(measured, start, goal, cfg.factors.sigma_goal).sigma[0];
  CHECK(goal_info() == Catch::Approx(expected));
  CHECK(goal_info() > first);
}

// ---------------------------------------------------------------------------
// Search

TEST_CASE("search_best_leaf", "[jist][search]") {
  SECTION("single chain") {
    FactorGraph g;
    const VariableId r = g.add_variable(std::nullopt, StateVector::Zero(6));
    const VariableId a = g.add_variable(r, StateVector::Zero(6));
    const VariableId b = g.add_variable(a, StateVector::Zero(6));
    g.add_factor(scalar_cost(1.0), {a});
    g.add_factor(scalar_cost(2.0), {b});
    const PlanStep s = search_best_leaf(g);
    CHECK(s.best_leaf == b);
    CHECK(s.normalized_cost == Catch::Approx(1.5));
    CHECK(s.best_path == std::vector<VariableId>{r, a, b});
  }
  SECTION("deeper leaf with lower per-edge cost wins") {
    // root -> a -> leaf2 (cost 4.0 over 2 edges); root -> b -> c -> leaf3 (4.5 over 3 edges).
    FactorGraph g;
    const VariableId r = g.add_variable(std::nullopt, StateVector::Zero(6));
    const VariableId a = g.add_variable(r, StateVector::Zero(6));
    const VariableId l2 = g.add_variable(a, StateVector::Zero(6));
    const VariableId b = g.add_variable(r, StateVector::Zero(6));
    const VariableId c = g.add_variable(b, StateVector::Zero(6));
    const VariableId l3 = g.add_variable(c, StateVector::Zero(6));
    g.add_factor(scalar_cost(2.0), {a});
    g.add_factor(scalar_cost(2.0), {l2});
    g.add_factor(scalar_cost(1.5), {b});
    g.add_factor(scalar_cost(1.5), {c});
    g.add_factor(scalar_cost(1.5), {l3});
    const auto scores = enumerate_leaf_scores(g);
    CHECK(scores.at(l2) == Catch::Approx(2.0));
    CHECK(scores.at(l3) == Catch::Approx(1.5));
    const PlanStep s = search_best_leaf(g);
    CHECK(s.best_leaf == l3);
    CHECK(s.next_state == g.value(b));

    // A factor off the chosen path leaves the choice alone.
    g.add_factor(scalar_cost(0.1), {l2});
    CHECK(search_best_leaf(g).best_leaf == l3);
  }
  SECTION("ties go to the smallest leaf id") {
    FactorGraph g;
    const VariableId r = g.add_variable(std::nullopt, StateVector::Zero(6));
    const VariableId a = g.add_variable(r, StateVector::Zero(6));
    g.add_variable(r, StateVector::Zero(6));
    CHECK(search_best_leaf(g).best_leaf == a);
  }
  SECTION("root without children") {
    FactorGraph g;
    g.add_variable(std::nullopt, StateVector::Zero(6));
    CHECK_THROWS_AS(search_best_leaf(g), Error);
  }
}

TEST_CASE("search agrees with path enumeration on grown graphs", "[jist][search]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    PlannerConfig cfg = small_config(25);
    cfg.rng_seed = seed;
    JistPlanner p(cfg, RobotShape::disk(1.0));
    p.reset(planar::make_state(10, 10, 0), planar::make_state(35, 50, 0), Bounds{Vec2::Zero(), Vec2(45, 60)});
    const auto sdf = std::make_shared<const SdfGrid>(
        build_sdf(std::vector<Rect>{Rect::square(Vec2(14, 12), 4)}, Window{Vec2(10, 10), 15.0}, 0.25));
    const PlanStep step = p.plan(sdf);
    const auto scores = enumerate_leaf_scores(p.graph());
    VariableId best = scores.begin()->first;
    for (const auto& [leaf, s] : scores) {
      if (s < scores.at(best)) best = leaf;
    }
    CHECK(step.best_leaf == best);
    CHECK(step.normalized_cost == Catch::Approx(scores.at(best)).epsilon(1e-12));
  }
}

// ---------------------------------------------------------------------------
// Pruning and iterations

TEST_CASE("prune_unreachable keeps the executed subtree", "[jist][prune]") {
  PlannerConfig cfg = small_config(4);
  JistPlanner p(cfg, RobotShape::disk(1.0));
  p.reset(planar::make_state(0, 0, 0), planar::make_state(20, 0, 0), Bounds{Vec2(-30, -30), Vec2(30, 30)});
  // Three children of the root, one grandchild under the second.
  int call = 0;
  const std::vector<Vec2> targets{Vec2(1, 0), Vec2(0, 1), Vec2(-1, 0)};
  p.set_sampler([&](const FactorGraph&, std::mt19937_64&) {
    const Vec2 t = targets[static_cast<std::size_t>(call++ % 3)];
    return planar::make_state(t.x(), t.y(), 0);
  });
  p.grow();
  REQUIRE(p.graph().children(p.graph().root()).size() == 3);
  FactorGraph& g = p.graph();
  const VariableId b = g.children(g.root())[1];
  const VariableId grandchild = g.add_variable(b, planar::make_state(0, 2, 0));
  p.factors().attach_edge(g, b, grandchild);

  const StateVector commanded = g.value(b);
  p.prune_unreachable(commanded, b);
  CHECK(g.root() == b);
  CHECK(g.variable_ids() == std::vector<VariableId>{b, grandchild});
  CHECK(g.value(b) == commanded);
  check_planner_graph(g, cfg.factors.n_interp);

  CHECK_THROWS_AS(p.prune_unreachable(commanded, VariableId{999}), Error);
}

TEST_CASE("plan iterations keep the budget and lower the cost", "[jist][plan]") {
  PlannerConfig cfg = small_config(20);
  JistPlanner p(cfg, RobotShape::disk(1.0));
  const StateVector start = planar::make_state(5, 5, 0.5);
  p.reset(start, planar::make_state(40, 50, 0), Bounds{Vec2::Zero(), Vec2(45, 60)});
  const auto sdf = std::make_shared<const SdfGrid>(
      build_sdf(std::vector<Rect>{Rect::square(Vec2(10, 10), 4)}, Window{Vec2(5, 5), 15.0}, 0.25));
  const PlanStep step = p.plan(sdf);
  CHECK(p.graph().size() == cfg.node_budget);
  CHECK(p.last_solve().final_cost <= p.last_solve().initial_cost);
  CHECK(step.best_path.front() == p.graph().root());
  CHECK(p.graph().parent(step.best_path[1]) == p.graph().root());
  CHECK(step.next_state == p.graph().value(step.best_path[1]));
  CHECK(step.compute_seconds > 0.0);
}

TEST_CASE("planner iterations are reproducible", "[jist][plan]") {
  auto run = [] {
    PlannerConfig cfg = small_config(15);
    JistPlanner p(cfg, RobotShape::disk(1.0));
    p.reset(planar::make_state(5, 5, 0.5), planar::make_state(40, 50, 0), Bounds{Vec2::Zero(), Vec2(45, 60)});
    const auto sdf = std::make_shared<const SdfGrid>(
        build_sdf(std::vector<Rect>{Rect::square(Vec2(10, 10), 4)}, Window{Vec2(5, 5), 15.0}, 0.25));
    std::vector<StateVector> out;
    for (int i = 0; i < 5; ++i) {
      const PlanStep s = p.plan(sdf);
      out.push_back(s.next_state);
      p.commit(s, s.next_state);
    }
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("run_episode outcomes", "[jist][episode]") {
  SECTION("start at the goal") {
    const StateVector s = planar::make_state(10, 10, 0);
    Scenario sc = make_env(scripted_env({}, s, planar::make_state(10.2, 10, 0)), 0);
    JistPlanner p(small_config(), RobotShape::disk(1.5));
    const EpisodeResult r = run_episode(sc.world, p, sc.start, sc.goal);
    CHECK(r.outcome == Outcome::success);
    CHECK(r.iterations == 0);
    CHECK(r.normalized_distance.has_value());
  }
  SECTION("empty world reaches the goal") {
    const StateVector s = planar::make_state(5, 20, 0);
    const StateVector g = planar::make_state(35, 20, 0);
    Scenario sc = make_env(scripted_env({}, s, g), 0);
    PlannerConfig cfg = small_config(30);
    JistPlanner p(cfg, RobotShape::disk(1.5));
    const EpisodeResult r = run_episode(sc.world, p, sc.start, sc.goal);
    CHECK(r.outcome == Outcome::success);
    REQUIRE(r.normalized_distance.has_value());
    CHECK(*r.normalized_distance >= 0.95);
    CHECK(*r.normalized_distance <= 2.0);
  }
  SECTION("an obstacle driven through the robot ends in collision") {
    const StateVector s = planar::make_state(10, 20, 0);
    const StateVector g = planar::make_state(40, 20, 0);
    Obstacle ram;
    ram.footprint = Rect::square(Vec2(16, 20), 4.0);
    ram.velocity = Vec2(-6.0, 0.0);
    EnvConfig env = scripted_env({ram}, s, g);
    Scenario sc = make_env(env, 0);
    PlannerConfig cfg = small_config(2);
    JistPlanner p(cfg, RobotShape::disk(1.5));
    const EpisodeResult r = run_episode(sc.world, p, sc.start, sc.goal);
    CHECK(r.outcome == Outcome::collision);
    CHECK_FALSE(r.normalized_distance.has_value());
  }
}

TEST_CASE("structural invariants hold across a fuzz run", "[jist][fuzz]") {
  // 100 planner iterations over forest worlds; a new seed starts whenever an
  // episode ends.
  BenchmarkConfig bench = default_benchmark(EnvKind::forest);
  PlannerConfig cfg = bench.jist;
  cfg.factors = bench.factors;
  cfg.node_budget = 25;
  int iterations = 0;
  for (std::uint64_t seed = 0; iterations < 100; ++seed) {
    Scenario sc = make_env(bench.env, seed);
    cfg.rng_seed = seed;
    JistPlanner p(cfg, RobotShape::disk(bench.env.robot_radius));
    p.reset(sc.start, sc.goal, sc.world.bounds());
    check_planner_graph(p.graph(), cfg.factors.n_interp);
    while (iterations < 100 && !sc.world.goal_reached(sc.goal, cfg.goal_tolerance)) {
      const auto sdf = std::make_shared<const SdfGrid>(sc.world.observe_sdf());
      const PlanStep step = p.plan(sdf);
      ++iterations;
      CHECK(p.graph().size() == cfg.node_budget);
      check_planner_graph(p.graph(), cfg.factors.n_interp);
      sc.world.execute_transition(step.next_state, cfg.dt);
      if (sc.world.collided()) break;
      const std::size_t before = p.graph().size();
      p.commit(step, sc.world.measure_state());
      CHECK(p.graph().size() <= before);
      check_planner_graph(p.graph(), cfg.factors.n_interp);
    }
  }
}

TEST_CASE("a goal-seeking sampler reduces the tree to a chain", "[jist][reduction]") {
  PlannerConfig cfg = small_config(12);
  JistPlanner p(cfg, RobotShape::disk(1.0));
  const StateVector goal = planar::make_state(40, 0, 0);
  p.reset(planar::make_state(0, 0, 0), goal, Bounds{Vec2(-50, -50), Vec2(50, 50)});
  // Sampling the goal always extends the node nearest to it, the deepest one.
  p.set_sampler([&](const FactorGraph&, std::mt19937_64&) { return goal; });
  const PlanStep step = p.plan(empty_sdf());
  const FactorGraph& g = p.graph();
  REQUIRE(g.leaves().size() == 1);
  for (VariableId v : g.variable_ids()) CHECK(g.children(v).size() <= 1);
  CHECK(step.best_leaf == g.leaves().front());
  CHECK(step.best_path.size() == cfg.node_budget);
}
