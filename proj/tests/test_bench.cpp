#include <catch_amalgamated.hpp>

#include <sstream>

#include "jist/bench.hpp"

using namespace jist;

namespace {

// Small planners and short episodes so that trials finish quickly.
BenchmarkConfig quick_config() {
  BenchmarkConfig cfg = default_benchmark(EnvKind::forest);
  cfg.jist.node_budget = 12;
  cfg.jist.max_iterations = 25;
  cfg.opt.horizon = 8;
  cfg.opt.max_iterations = 25;
  cfg.samp.node_budget = 30;
  cfg.samp.max_iterations = 25;
  cfg.trials = 2;
  cfg.seed = 3;
  return cfg;
}

TrialResult trial(Outcome o, double exec, std::optional<double> dist, std::vector<double> compute) {
  TrialResult t;
  t.outcome = o;
  t.execution_time = exec;
  t.normalized_distance = dist;
  t.compute_seconds = std::move(compute);
  t.iterations = t.compute_seconds.size();
  return t;
}

bool same_outcomes(const TrialResult& a, const TrialResult& b) {
  return a.outcome == b.outcome && a.execution_time == b.execution_time &&
         a.normalized_distance == b.normalized_distance && a.iterations == b.iterations &&
         a.world_hash == b.world_hash;
}

}  // namespace

TEST_CASE("config JSON round trip", "[bench][config]") {
  for (EnvKind kind : {EnvKind::static_grid, EnvKind::forest, EnvKind::patrol, EnvKind::toggle}) {
    BenchmarkConfig cfg = default_benchmark(kind);
    cfg.jist.node_budget = 33;
    cfg.factors.qc = Eigen::Vector3d(0.5, 0.7, 0.2);
    cfg.planners = {PlannerKind::samp, PlannerKind::jist};
    const std::string text = config_to_json(cfg);
    const BenchmarkConfig back = config_from_json(text);
    CHECK(config_to_json(back) == text);
    CHECK(back.env.kind == kind);
    CHECK(back.jist.node_budget == 33);
    CHECK(back.factors.qc.isApprox(cfg.factors.qc));
    CHECK(back.planners == cfg.planners);
  }
}

TEST_CASE("config errors", "[bench][config]") {
  CHECK_THROWS_AS(config_from_json("{\"jist\": {\"node_budgett\": 3}}"), Error);
  CHECK_THROWS_AS(config_from_json("{not json"), Error);
  CHECK_THROWS_AS(config_from_json("{\"jist\": {\"node_budget\": 1}}"), Error);
  CHECK_THROWS_AS(config_from_json("{\"planners\": [\"rrt\"]}"), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/dir/cfg.json"), Error);
  try {
    config_from_json("{\"bogus\": 1}");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::config);
  }
}

TEST_CASE("set_param", "[bench][config]") {
  BenchmarkConfig cfg = default_benchmark(EnvKind::forest);
  set_param(cfg, "jist.node_budget", "17");
  CHECK(cfg.jist.node_budget == 17);
  set_param(cfg, "env.top_speed", "0.75");
  CHECK(cfg.env.top_speed == 0.75);
  set_param(cfg, "env.kind", "static");
  CHECK(cfg.env.kind == EnvKind::static_grid);
  CHECK_THROWS_AS(set_param(cfg, "jist.nope", "1"), Error);
  CHECK_THROWS_AS(set_param(cfg, "jist.node_budget", "\"many\""), Error);
  // A rejected value leaves the config untouched.
  CHECK(cfg.jist.node_budget == 17);
}

TEST_CASE("with_axis changes exactly one axis", "[bench][ablation]") {
  const BenchmarkConfig base = default_benchmark(EnvKind::forest);
  const BenchmarkConfig obs = with_axis(base, AblationAxis::obstacles, 10);
  CHECK(obs.env.obstacle_count == 10);
  CHECK(obs.env.top_speed == base.env.top_speed);
  const BenchmarkConfig speed = with_axis(base, AblationAxis::speed, 0.5);
  CHECK(speed.env.top_speed == 0.5);
  CHECK(speed.env.obstacle_count == base.env.obstacle_count);
  const BenchmarkConfig noise = with_axis(base, AblationAxis::noise, 0.2);
  CHECK(noise.env.exec_noise.sigma == Eigen::Vector3d::Constant(0.2));
  const BenchmarkConfig budget = with_axis(base, AblationAxis::budget, 25);
  CHECK(budget.jist.node_budget == 25);
  CHECK(budget.samp.node_budget == 25);
  CHECK(budget.opt.horizon == 25);
  CHECK_THROWS_AS(with_axis(base, AblationAxis::budget, 1), Error);
  CHECK(config_to_json(with_axis(base, AblationAxis::none, 3)) == config_to_json(base));
}

TEST_CASE("aggregate", "[bench][metrics]") {
  const std::vector<TrialResult> trials{
      trial(Outcome::success, 10.0, 1.2, {0.1, 0.3}),
      trial(Outcome::collision, 4.0, std::nullopt, {0.2}),
      trial(Outcome::success, 20.0, 1.4, {0.2, 0.2, 0.2}),
      trial(Outcome::timeout, 50.0, std::nullopt, {}),
  };
  const MetricsRow row = aggregate(PlannerKind::opt, 3.0, trials);
  CHECK(row.planner == PlannerKind::opt);
  CHECK(row.axis_value == 3.0);
  CHECK(row.success == 0.5);
  CHECK(*row.exec_time == Catch::Approx(15.0));
  CHECK(*row.norm_dist == Catch::Approx(1.3));
  // Per-iteration mean over every trial, failed ones included.
  CHECK(row.compute_time == Catch::Approx(1.2 / 6.0));
  CHECK(row.n_trials == 4);

  const MetricsRow none = aggregate(PlannerKind::jist, std::nullopt, {trial(Outcome::timeout, 1.0, std::nullopt, {})});
  CHECK(none.success == 0.0);
  CHECK_FALSE(none.exec_time.has_value());
  CHECK_FALSE(none.norm_dist.has_value());
  CHECK(none.compute_time == 0.0);

  const MetricsRow empty = aggregate(PlannerKind::samp, std::nullopt, {});
  CHECK(empty.n_trials == 0);
  CHECK(empty.success == 0.0);
}

TEST_CASE("CSV format", "[bench][metrics]") {
  std::ostringstream header_only;
  write_csv(MetricsTable{}, header_only);
  CHECK(header_only.str() == "planner,axis_value,success,exec_time_s,compute_time_s,norm_dist,n_trials\n");

  MetricsRow a;
  a.planner = PlannerKind::jist;
  a.success = 2.0 / 3.0;
  a.exec_time = 12.345678;
  a.compute_time = 0.00123;
  a.norm_dist = 1.1;
  a.n_trials = 3;
  MetricsRow b;
  b.planner = PlannerKind::samp;
  b.axis_value = 20.0;
  b.n_trials = 3;
  std::ostringstream os;
  write_csv({a, b}, os);
  CHECK(os.str() ==
        "planner,axis_value,success,exec_time_s,compute_time_s,norm_dist,n_trials\n"
        "jist,-,0.6667,12.3457,0.0012,1.1000,3\n"
        "samp,20.0000,0.0000,-,0.0000,-,3\n");
  CHECK_THROWS_AS(write_csv(MetricsTable{}, std::filesystem::path("/nonexistent/dir/out.csv")), Error);
}

TEST_CASE("trials are reproducible and share worlds", "[bench][determinism]") {
  const BenchmarkConfig cfg = quick_config();
  for (PlannerKind kind : {PlannerKind::jist, PlannerKind::opt, PlannerKind::samp}) {
    const TrialResult a = run_trial(kind, cfg, 4);
    const TrialResult b = run_trial(kind, cfg, 4);
    CHECK(same_outcomes(a, b));
    CHECK(a.world_hash == run_trial(PlannerKind::jist, cfg, 4).world_hash);
    CHECK(a.seed == 4);
    CHECK(a.planner == kind);
  }
  CHECK(run_trial(PlannerKind::opt, cfg, 4).world_hash != run_trial(PlannerKind::opt, cfg, 5).world_hash);
}

TEST_CASE("planner order does not change results", "[bench][determinism]") {
  BenchmarkConfig cfg = quick_config();
  std::vector<TrialResult> forward;
  std::vector<TrialResult> reverse;
  const MetricsTable t1 = run_benchmark(cfg, {std::nullopt, [&](const TrialResult& r) { forward.push_back(r); }});
  cfg.planners = {PlannerKind::samp, PlannerKind::opt, PlannerKind::jist};
  const MetricsTable t2 = run_benchmark(cfg, {std::nullopt, [&](const TrialResult& r) { reverse.push_back(r); }});
  REQUIRE(t1.size() == 3);
  REQUIRE(t2.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(t1[i].planner == t2[i].planner);
    CHECK(t1[i].success == t2[i].success);
    CHECK(t1[i].exec_time == t2[i].exec_time);
    CHECK(t1[i].norm_dist == t2[i].norm_dist);
  }
  // Rows come sorted by planner name.
  CHECK(t1[0].planner == PlannerKind::jist);
  CHECK(t1[1].planner == PlannerKind::opt);
  CHECK(t1[2].planner == PlannerKind::samp);
  REQUIRE(forward.size() == reverse.size());
  for (const TrialResult& f : forward) {
    const auto match = std::find_if(reverse.begin(), reverse.end(),
                                    [&](const TrialResult& r) { return r.planner == f.planner && r.seed == f.seed; });
    REQUIRE(match != reverse.end());
    CHECK(same_outcomes(f, *match));
  }
}

TEST_CASE("ablation emits one row per planner and value", "[bench][ablation]") {
  BenchmarkConfig cfg = quick_config();
  cfg.trials = 1;
  cfg.planners = {PlannerKind::opt};
  cfg.axis = AblationAxis::obstacles;
  cfg.values = {5, 15};
  std::vector<std::uint64_t> hashes;
  const MetricsTable t = run_benchmark(cfg, {std::nullopt, [&](const TrialResult& r) { hashes.push_back(r.world_hash); }});
  REQUIRE(t.size() == 2);
  CHECK(t[0].axis_value == 5.0);
  CHECK(t[1].axis_value == 15.0);
  REQUIRE(hashes.size() == 2);
  CHECK(hashes[0] != hashes[1]);

  cfg.values.clear();
  CHECK_THROWS_AS(run_benchmark(cfg), Error);
}

TEST_CASE("trace output has one line per iteration", "[bench][trace]") {
  const BenchmarkConfig cfg = quick_config();
  std::ostringstream trace;
  std::size_t observed = 0;
  TrialOptions opts;
  opts.trace = &trace;
  opts.observer = [&](const IterationRecord&) { ++observed; };
  const TrialResult r = run_trial(PlannerKind::jist, cfg, 2, opts);
  std::size_t lines = 0;
  std::istringstream is(trace.str());
  for (std::string line; std::getline(is, line);) ++lines;
  CHECK(lines == r.iterations);
  CHECK(observed == r.iterations);
  CHECK(r.compute_seconds.size() == r.iterations);
}

TEST_CASE("replay reproduces the simulated obstacles", "[bench][replay]") {
  BenchmarkConfig cfg = quick_config();
  WorldScript recorded;
  TrialOptions opts;
  opts.on_finish = [&](const World& w) { recorded = w.script(); };
  const TrialResult live = run_trial(PlannerKind::opt, cfg, 6, opts);
  REQUIRE(!recorded.frames.empty());
  const TrialResult replay = run_replay_trial(PlannerKind::opt, cfg, recorded, 6);
  CHECK(replay.outcome == live.outcome);
  CHECK(replay.iterations == live.iterations);
}
