#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "hfmdp/generators.hpp"
#include "hfmdp/model_io.hpp"
#include "hfmdp/report.hpp"
#include "hfmdp/reuse.hpp"

using namespace hfmdp;

namespace {

nlohmann::json plan_report(const SubsystemTree& t, const RelevanceWeights& w, const RunConfig& cfg) {
  auto report = make_report("compare", cfg, t, w);
  const auto plan = run_planner(t, w, cfg.planner_config(nullptr));
  report["plan"] = plan_json(t, plan);
  report["compare"] = comparison_json(t, compare_with_oracles(t, w, plan, cfg));
  return report;
}

}  // namespace

TEST_CASE("run configuration checks") {
  RunConfig c;
  CHECK_NOTHROW(c.check());
  c.convergence_tolerance = 0.0;
  CHECK_THROWS_AS(c.check(), InputError);
  c = {};
  c.max_iterations = 0;
  CHECK_THROWS_AS(c.check(), InputError);
  c = {};
  c.message_bound = -1.0;
  CHECK_THROWS_AS(c.check(), InputError);
  c = {};
  c.oracle_cap = 0;
  CHECK_THROWS_AS(c.check(), InputError);

  c = {};
  c.schedule = ScheduleKind::Random;
  c.seed = 11;
  ReuseCache cache;
  const auto p = c.planner_config(&cache);
  CHECK(p.schedule == ScheduleKind::Random);
  CHECK(p.seed == 11);
  CHECK(p.cache == &cache);
  c.reuse = false;
  CHECK(c.planner_config(&cache).cache == nullptr);
}

TEST_CASE("comparison on the coupled example") {
  const auto t = testing::coupled_xy();
  const auto w = RelevanceWeights::ones(t);
  RunConfig cfg;
  const auto plan = run_planner(t, w, cfg.planner_config(nullptr));
  const auto cmp = compare_with_oracles(t, w, plan, cfg);
  CHECK(cmp.distributed_objective == doctest::Approx(124.0));
  CHECK(cmp.centralized_objective == doctest::Approx(124.0));
  REQUIRE(cmp.exact_objective);
  CHECK(*cmp.exact_objective == doctest::Approx(124.0));
  CHECK(cmp.representable);
  REQUIRE(cmp.joint_values.size() == 4);
  const double expected[] = {54.0, 64.0, 60.0, 70.0};
  for (int s = 0; s < 4; ++s) CHECK(cmp.joint_values[s] == doctest::Approx(expected[s]));
  CHECK(cmp.max_value_delta <= 1e-6);
  CHECK(cmp.max_message_delta <= 1e-6);
  CHECK(cmp.feasibility_violation <= 1e-7);

  cfg.oracle_cap = 2;
  CHECK_THROWS_AS(compare_with_oracles(t, w, plan, cfg), OracleCapError);
}

TEST_CASE("reports survive a JSON round trip byte for byte") {
  const auto m = load_model(testing::model_path("engine.hmdp"));
  const auto report = plan_report(m.tree, m.weights, RunConfig{});
  CHECK(report["schema_version"] == kReportSchemaVersion);
  CHECK(report["command"] == "compare");
  CHECK_FALSE(report.contains("timing"));
  const std::string text = dump_report(report);
  CHECK(text.back() == '\n');
  CHECK(dump_report(nlohmann::json::parse(text)) == text);
}

TEST_CASE("reports are deterministic") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto g = random_tree(seed);
    RunConfig cfg;
    cfg.schedule = ScheduleKind::Random;
    cfg.seed = seed + 100;
    CHECK(dump_report(plan_report(g.tree, g.weights, cfg)) == dump_report(plan_report(g.tree, g.weights, cfg)));
  }
}

TEST_CASE("plan section layout") {
  const auto t = testing::coupled_xy();
  const auto plan = run_planner(t, RelevanceWeights::ones(t));
  const auto j = plan_json(t, plan);
  REQUIRE(j["values"].size() == 2);
  CHECK(j["values"][0]["subsystem"] == "M1");
  // Only the non-root subsystem has a message.
  REQUIRE(j["messages"].size() == 1);
  CHECK(j["messages"][0]["subsystem"] == "M2");
  CHECK(j["converged"] == true);
}
