#include <catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "jist/jist.h"

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "jist_c_api_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

jist_config* quick_config() {
  jist_config* cfg = nullptr;
  REQUIRE(jist_config_create("forest", &cfg) == JIST_OK);
  REQUIRE(jist_config_set(cfg, "jist.node_budget", "10") == JIST_OK);
  REQUIRE(jist_config_set(cfg, "jist.max_iterations", "15") == JIST_OK);
  REQUIRE(jist_config_set(cfg, "opt.max_iterations", "15") == JIST_OK);
  REQUIRE(jist_config_set(cfg, "samp.node_budget", "20") == JIST_OK);
  REQUIRE(jist_config_set(cfg, "samp.max_iterations", "15") == JIST_OK);
  REQUIRE(jist_config_set(cfg, "trials", "1") == JIST_OK);
  return cfg;
}

}  // namespace

TEST_CASE("names and statuses", "[c_api]") {
  CHECK(std::string(jist_status_string(JIST_OK)) == "ok");
  CHECK(std::string(jist_status_string(JIST_ERR_BUFFER_TOO_SMALL)).size() > 0);
  jist_planner p;
  CHECK(jist_planner_from_string("samp", &p) == JIST_OK);
  CHECK(p == JIST_PLANNER_SAMP);
  CHECK(std::string(jist_planner_name(JIST_PLANNER_OPT)) == "opt");
  CHECK(jist_planner_from_string("astar", &p) == JIST_ERR_CONFIG);
  CHECK(std::string(jist_last_error()).find("astar") != std::string::npos);
  CHECK(std::string(jist_outcome_name(JIST_OUTCOME_COLLISION)) == "collision");
}

TEST_CASE("null arguments are rejected", "[c_api]") {
  jist_config* cfg = nullptr;
  CHECK(jist_config_create(nullptr, &cfg) == JIST_ERR_INVALID_ARGUMENT);
  CHECK(jist_config_create("forest", nullptr) == JIST_ERR_INVALID_ARGUMENT);
  CHECK(jist_config_parse(nullptr, &cfg) == JIST_ERR_INVALID_ARGUMENT);
  CHECK(jist_config_set(nullptr, "trials", "1") == JIST_ERR_INVALID_ARGUMENT);
  jist_trial_result r;
  CHECK(jist_run_trial(nullptr, JIST_PLANNER_JIST, 0, nullptr, &r) == JIST_ERR_INVALID_ARGUMENT);
  CHECK(jist_table_size(nullptr) == 0);
  jist_config_free(nullptr);
  jist_table_free(nullptr);
  jist_world_free(nullptr);
}

TEST_CASE("config handles", "[c_api][config]") {
  jist_config* cfg = nullptr;
  CHECK(jist_config_create("moon", &cfg) == JIST_ERR_CONFIG);
  CHECK(cfg == nullptr);
  REQUIRE(jist_config_create("static", &cfg) == JIST_OK);

  size_t needed = 0;
  char tiny[4];
  CHECK(jist_config_to_json(cfg, tiny, sizeof tiny, &needed) == JIST_ERR_BUFFER_TOO_SMALL);
  REQUIRE(needed > sizeof tiny);
  std::string buf(needed, '\0');
  REQUIRE(jist_config_to_json(cfg, buf.data(), buf.size(), &needed) == JIST_OK);
  CHECK(std::strlen(buf.c_str()) + 1 == needed);

  jist_config* parsed = nullptr;
  REQUIRE(jist_config_parse(buf.c_str(), &parsed) == JIST_OK);
  CHECK(jist_config_set(parsed, "no.such.key", "1") == JIST_ERR_CONFIG);
  CHECK(jist_config_parse("{oops", &cfg) == JIST_ERR_CONFIG);

  const auto path = scratch("cfg.json");
  REQUIRE(jist_config_save(parsed, path.c_str()) == JIST_OK);
  jist_config* loaded = nullptr;
  REQUIRE(jist_config_load(path.c_str(), &loaded) == JIST_OK);
  std::string again(needed, '\0');
  REQUIRE(jist_config_to_json(loaded, again.data(), again.size(), &needed) == JIST_OK);
  CHECK(again == buf);
  CHECK(jist_config_load("/nonexistent/dir/cfg.json", &cfg) == JIST_ERR_IO);
  CHECK(jist_config_save(loaded, "/nonexistent/dir/cfg.json") == JIST_ERR_IO);

  jist_config_free(loaded);
  jist_config_free(parsed);
  jist_config_free(cfg);
}

TEST_CASE("trials and tables", "[c_api][run]") {
  jist_config* cfg = quick_config();
  jist_trial_result a;
  jist_trial_result b;
  const auto trace = scratch("trace.txt");
  REQUIRE(jist_run_trial(cfg, JIST_PLANNER_JIST, 3, trace.c_str(), &a) == JIST_OK);
  REQUIRE(jist_run_trial(cfg, JIST_PLANNER_JIST, 3, nullptr, &b) == JIST_OK);
  CHECK(a.planner == JIST_PLANNER_JIST);
  CHECK(a.seed == 3);
  CHECK(a.outcome == b.outcome);
  CHECK(a.iterations == b.iterations);
  CHECK(a.world_hash == b.world_hash);
  CHECK(a.iterations <= 15);
  CHECK(std::filesystem::exists(trace));

  jist_table* table = nullptr;
  REQUIRE(jist_run_benchmark(cfg, nullptr, &table) == JIST_OK);
  REQUIRE(jist_table_size(table) == 3);
  jist_table_row row;
  REQUIRE(jist_table_row_at(table, 0, &row) == JIST_OK);
  CHECK(row.planner == JIST_PLANNER_JIST);
  CHECK(row.n_trials == 1);
  CHECK(row.has_axis_value == 0);
  CHECK(jist_table_row_at(table, 3, &row) == JIST_ERR_OUT_OF_RANGE);
  const auto csv = scratch("table.csv");
  REQUIRE(jist_table_write_csv(table, csv.c_str()) == JIST_OK);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "planner,axis_value,success,exec_time_s,compute_time_s,norm_dist,n_trials");
  CHECK(jist_table_write_csv(table, "/nonexistent/dir/t.csv") == JIST_ERR_IO);
  jist_table_free(table);
  jist_config_free(cfg);
}

TEST_CASE("world handles", "[c_api][world]") {
  jist_config* cfg = quick_config();
  jist_world* w = nullptr;
  REQUIRE(jist_world_create(cfg, 5, &w) == JIST_OK);
  double start[6];
  double goal[6];
  REQUIRE(jist_world_start_goal(w, start, goal) == JIST_OK);
  CHECK(std::hypot(goal[0] - start[0], goal[1] - start[1]) >= 35.0);
  size_t n = 0;
  REQUIRE(jist_world_obstacle_count(w, &n) == JIST_OK);
  CHECK(n == 30);
  REQUIRE(jist_world_step(w, 0.5) == JIST_OK);
  CHECK(jist_world_step(w, -1.0) == JIST_ERR_INVALID_ARGUMENT);
  double t = 0.0;
  REQUIRE(jist_world_time(w, &t) == JIST_OK);
  CHECK(t == 0.5);

  const auto script = scratch("world.txt");
  const auto sdf = scratch("sdf.txt");
  REQUIRE(jist_world_write_script(w, script.c_str()) == JIST_OK);
  REQUIRE(jist_world_write_sdf(w, start[0], start[1], sdf.c_str()) == JIST_OK);
  CHECK(std::filesystem::file_size(sdf) > 0);

  jist_trial_result r;
  REQUIRE(jist_run_replay(cfg, JIST_PLANNER_OPT, script.c_str(), 5, &r) == JIST_OK);
  CHECK(r.planner == JIST_PLANNER_OPT);
  CHECK(jist_run_replay(cfg, JIST_PLANNER_OPT, "/nonexistent/world.txt", 5, &r) == JIST_ERR_IO);
  jist_world_free(w);
  jist_config_free(cfg);
}
