#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "hfmdp/coordinator.hpp"
#include "hfmdp/generators.hpp"

using namespace hfmdp;

namespace {

constexpr ScheduleKind kAllSchedules[] = {ScheduleKind::Sync, ScheduleKind::LeavesFirst, ScheduleKind::Random};

/// Banks of the coupled example after both subsystems tried their two
/// deterministic policies (all-ones weights, so every row has mass 20).
struct CoupledBanks {
  SubsystemTree tree = testing::coupled_xy();
  LocalPolicyBank local{{Scope(), tree.sepset(1)}};
  SubtreePolicyBank child{tree.sepset(1)};
  RewardMessage own = RewardMessage::zero(Scope());

  MessageLpInput input(double bound = 1e3) const {
    MessageLpInput in;
    in.local = &local;
    in.children = {&child};
    in.own = &own;
    in.message_bound = bound;
    return in;
  }
};

}  // namespace

TEST_CASE("message LP layout") {
  CoupledBanks b;
  b.local.record(0.0, {{20.0}, {20.0, 0.0}});
  b.child.record(190.0, {0.0, 20.0});
  const LinearProgram lp = build_message_lp(b.input(), true);
  CHECK(lp.variable_count() == 1 + 1 + 2);
  CHECK(lp.ge_rows() == 2);
  CHECK(lp.cost[0] == 1.0);
  CHECK(lp.cost[1] == 1.0);
  CHECK(lp.lower[0] == -kInf);
  CHECK(lp.lower[2] == -1e3);
  CHECK(lp.upper[3] == 1e3);
  // Local row: θ_1 − Φ S ≥ L.
  CHECK(lp.a_ge(0, 0) == 1.0);
  CHECK(lp.a_ge(0, 2) == -20.0);
  CHECK(lp.b_ge[0] == 0.0);
  // Child row: θ_2 + Φ S ≥ T.
  CHECK(lp.a_ge(1, 1) == 1.0);
  CHECK(lp.a_ge(1, 3) == 20.0);
  CHECK(lp.b_ge[1] == 190.0);
  const LinearProgram open = build_message_lp(b.input(), false);
  CHECK(open.lower[2] == -kInf);
}

TEST_CASE("first coordination step of the coupled example is unbounded") {
  CoupledBanks b;
  b.local.record(0.0, {{20.0}, {20.0, 0.0}});
  b.child.record(190.0, {0.0, 20.0});
  const auto sol = solve_message_lp(b.input(), {b.tree.sepset(1)});
  CHECK(sol.probe_status == LpStatus::Unbounded);
  CHECK_FALSE(sol.bounded());
  CHECK_FALSE(sol.active_bounds.empty());
  REQUIRE(sol.child_messages.size() == 1);
  // The box pushes the incentive for x = 1 as high as it can go.
  CHECK(sol.child_messages[0].values[1] > sol.child_messages[0].values[0]);
}

TEST_CASE("bounded message LP: mixture weights and the incentive of 9") {
  CoupledBanks b;
  b.local.record(-3.0, {{20.0}, {19.0, 1.0}});
  b.local.record(-57.0, {{20.0}, {1.0, 19.0}});
  b.child.record(10.0, {20.0, 0.0});
  b.child.record(190.0, {0.0, 20.0});
  const auto sol = solve_message_lp(b.input(), {b.tree.sepset(1)});
  REQUIRE(sol.bounded());
  CHECK(sol.objective == doctest::Approx(124.0));
  CHECK(sol.active_bounds.empty());
  const auto& s = sol.child_messages[0].values;
  CHECK(s[1] - s[0] == doctest::Approx(9.0));
  CHECK(s[0] + s[1] == doctest::Approx(0.0));  // centred
  REQUIRE(sol.local_weights.size() == 2);
  CHECK(sol.local_weights[0] == doctest::Approx(0.0));
  CHECK(sol.local_weights[1] == doctest::Approx(1.0));
  CHECK(sol.child_weights[0][0] == doctest::Approx(0.05));
  CHECK(sol.child_weights[0][1] == doctest::Approx(0.95));
  const SubtreeRow row = subtree_statistics(sol, b.input());
  CHECK(row.value == doctest::Approx(124.0));
  REQUIRE(row.frequencies.size() == 1);
  CHECK(row.frequencies[0] == doctest::Approx(20.0));
}

TEST_CASE("schedules") {
  const auto t = testing::small_chain();
  CHECK(parse_schedule("sync") == ScheduleKind::Sync);
  CHECK(parse_schedule("leaves-first") == ScheduleKind::LeavesFirst);
  CHECK(parse_schedule("random") == ScheduleKind::Random);
  CHECK_THROWS_AS(parse_schedule("fifo"), InputError);
  CHECK(std::string(to_string(ScheduleKind::LeavesFirst)) == "leaves-first");

  Schedule sync(ScheduleKind::Sync, t, 0), leaves(ScheduleKind::LeavesFirst, t, 0);
  CHECK(sync.next_round() == t.preorder());
  CHECK(leaves.next_round() == t.postorder());

  const auto g = random_tree(5, RandomTreeOptions{4, 4});
  Schedule r1(ScheduleKind::Random, g.tree, 42), r2(ScheduleKind::Random, g.tree, 42);
  std::set<std::vector<std::size_t>> seen;
  for (int i = 0; i < 20; ++i) {
    auto a = r1.next_round();
    CHECK(a == r2.next_round());
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<std::size_t>{0, 1, 2, 3});
    seen.insert(a);
  }
  CHECK(seen.size() > 1);
}

TEST_CASE("coupled example converges to 124 under every schedule") {
  const auto t = testing::coupled_xy();
  const auto w = RelevanceWeights::ones(t);
  for (auto kind : kAllSchedules) {
    CAPTURE(to_string(kind));
    PlannerConfig cfg;
    cfg.schedule = kind;
    const PlanResult r = run_planner(t, w, cfg);
    CHECK(r.converged);
    CHECK(r.objective == doctest::Approx(124.0).epsilon(1e-9));
    CHECK(r.values[0][0] == doctest::Approx(9.0));
    CHECK(r.values[0][1] == doctest::Approx(15.0));
    CHECK(r.values[1][0] == doctest::Approx(45.0));
    CHECK(r.values[1][1] == doctest::Approx(55.0));
    CHECK(r.messages[1].values[1] - r.messages[1].values[0] == doctest::Approx(9.0));
    CHECK(r.messages[0].values == std::vector<double>{0.0});
    CHECK(r.bound_doublings == 0);

    const auto first = std::find_if(r.trace.begin(), r.trace.end(), [](const TraceEvent& e) { return e.event == "message-lp"; });
    REQUIRE(first != r.trace.end());
    CHECK(first->status == "unbounded");
  }
}

TEST_CASE("distributed objective matches frozen centralized values") {
  // Centralized factored LP objectives computed once by the oracle module.
  const std::pair<std::uint64_t, double> golden[] = {{0, 31.154795509977703},
                                                     {1, 126.91041343731376},
                                                     {2, 69.499999999999091},
                                                     {3, 126.11323774975608},
                                                     {4, 69.368345810015398}};
  for (const auto& [seed, expected] : golden) {
    const auto g = random_tree(seed);
    for (auto kind : kAllSchedules) {
      CAPTURE(seed);
      CAPTURE(to_string(kind));
      PlannerConfig cfg;
      cfg.schedule = kind;
      cfg.seed = seed;
      const PlanResult r = run_planner(g.tree, g.weights, cfg);
      CHECK(std::abs(r.objective - expected) <= 1e-6);
    }
  }
  const auto chain = testing::small_chain();
  CHECK(run_planner(chain, RelevanceWeights::ones(chain)).objective == doctest::Approx(74.059246775214888).epsilon(1e-9));
}

TEST_CASE("root master objective never decreases while the box is fixed") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = random_tree(seed);
    const auto r = run_planner(g.tree, g.weights);
    for (std::size_t i = 1; i < r.root_objectives.size(); ++i) {
      if (r.root_objectives[i].second != r.root_objectives[i - 1].second) continue;
      CHECK(r.root_objectives[i].first >= r.root_objectives[i - 1].first - 1e-7);
    }
  }
}

TEST_CASE("box escalation doubles the bound until the message LP is bounded") {
  const auto t = testing::coupled_xy();
  const auto w = RelevanceWeights::ones(t);
  PlannerConfig cfg;
  cfg.message_bound = 1.0;
  const auto r = run_planner(t, w, cfg);
  CHECK(r.converged);
  CHECK(r.bound_doublings == 3);
  CHECK(r.message_bound == 8.0);
  CHECK(r.objective == doctest::Approx(124.0));
  CHECK(std::count_if(r.trace.begin(), r.trace.end(), [](const TraceEvent& e) { return e.event == "escalate"; }) == 3);

  cfg.message_bound = 0.01;
  try {
    (void)run_planner(t, w, cfg);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK_FALSE(e.partial().converged);
    CHECK(e.partial().bound_doublings == 6);
    CHECK(e.partial().values.size() == 2);
    CHECK_FALSE(e.partial().trace.empty());
  }
}

TEST_CASE("round cap raises NonConvergenceError with the partial trace") {
  const auto g = random_tree(1);
  PlannerConfig cfg;
  cfg.max_iterations = 1;
  try {
    (void)run_planner(g.tree, g.weights, cfg);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK(e.partial().rounds == 1);
    CHECK(std::string(e.what()).find("1 rounds") != std::string::npos);
    CHECK_FALSE(e.partial().trace.empty());
  }
}

TEST_CASE("planner rejects inconsistent input and bad configuration") {
  const auto t = testing::coupled_xy();
  RelevanceWeights w = RelevanceWeights::ones(t);
  w.per_subsystem[1] = {3.0, 3.0};
  CHECK_THROWS_AS(run_planner(t, w), InputError);
  PlannerConfig cfg;
  cfg.convergence_tolerance = 0.0;
  CHECK_THROWS_AS(run_planner(t, RelevanceWeights::ones(t), cfg), InputError);
  cfg = {};
  cfg.max_iterations = 0;
  CHECK_THROWS_AS(run_planner(t, RelevanceWeights::ones(t), cfg), InputError);
}

TEST_CASE("planner runs are deterministic, including the trace") {
  const auto g = random_tree(7);
  PlannerConfig cfg;
  cfg.schedule = ScheduleKind::Random;
  cfg.seed = 9;
  const auto a = run_planner(g.tree, g.weights, cfg), b = run_planner(g.tree, g.weights, cfg);
  CHECK(a.objective == b.objective);
  CHECK(a.rounds == b.rounds);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].event == b.trace[i].event);
    CHECK(a.trace[i].objective == b.trace[i].objective);
  }
}

TEST_CASE("trace callback sees every event in order") {
  const auto t = testing::coupled_xy();
  std::vector<std::string> events;
  PlannerConfig cfg;
  cfg.on_event = [&](const TraceEvent& e) { events.push_back(e.event); };
  const auto r = run_planner(t, RelevanceWeights::ones(t), cfg);
  REQUIRE(events.size() == r.trace.size());
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i] == r.trace[i].event);
  CHECK(r.counters.standalone_solves >= 2);
  CHECK(r.counters.message_lp_solves >= 1);
}

TEST_CASE("default message bound scales with rewards and horizon") {
  const auto t = testing::coupled_xy();
  // 10 · (3 + 10) / (1 − 0.9)
  CHECK(default_message_bound(t) == doctest::Approx(1300.0));
}
