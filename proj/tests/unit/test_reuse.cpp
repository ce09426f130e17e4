#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "fixtures.hpp"
#include "hfmdp/coordinator.hpp"
#include "hfmdp/generators.hpp"
#include "hfmdp/model_io.hpp"
#include "hfmdp/reuse.hpp"

using namespace hfmdp;

TEST_CASE("class signatures ignore names but not tables or roles") {
  const auto g = twin_subtree_model(2, 3);
  const auto& t = g.tree;
  const auto a0 = *t.index_of("A0"), a1 = *t.index_of("A1"), b0 = *t.index_of("B0");
  CHECK(class_signature(t.subsystem(a0)) == class_signature(t.subsystem(a1)));
  CHECK_FALSE(class_signature(t.subsystem(a0)) == class_signature(t.subsystem(b0)));
  CHECK(class_signature(t.subsystem(a0)).digest.size() == 16);

  BasicSubsystem changed = t.subsystem(a1);
  changed.reward[0] += 1e-12;
  CHECK_FALSE(class_signature(changed) == class_signature(t.subsystem(a0)));

  BasicSubsystem signed_zero = t.subsystem(a1);
  for (auto& r : signed_zero.reward)
    if (r == 0.0) r = -0.0;
  CHECK(class_signature(signed_zero) == class_signature(t.subsystem(a1)));
}

TEST_CASE("subtree signatures match for twin subtrees only") {
  const auto g = twin_subtree_model(3, 1);
  const auto& t = g.tree;
  const auto a0 = *t.index_of("A0"), a1 = *t.index_of("A1"), a2 = *t.index_of("A2");
  const auto s0 = subtree_signature(t, g.weights, a0);
  CHECK(s0 == subtree_signature(t, g.weights, a1));
  CHECK(s0 == subtree_signature(t, g.weights, a2));
  CHECK_FALSE(s0 == subtree_signature(t, g.weights, t.root()));

  RelevanceWeights w = g.weights;
  w.per_subsystem[*t.index_of("B1")] = {2.0, 0.0};
  CHECK_FALSE(s0 == subtree_signature(t, w, a1));
}

TEST_CASE("memo store and flow pool") {
  const auto t = testing::coupled_xy();
  const auto cls = class_signature(t.subsystem(1));
  const std::vector<double> w{1.0, 1.0};
  ReuseCache cache;
  const auto key = ReuseCache::solution_key(cls, 0.9, w, t.subsystem(1).reward);
  CHECK(cache.find_solution(key) == nullptr);
  const auto f = solve_standalone(t.subsystem(1), 0.9, t.subsystem(1).reward, w);
  cache.store_solution(key, f);
  REQUIRE(cache.find_solution(key) != nullptr);
  CHECK(cache.find_solution(key)->value == f.value);
  CHECK(ReuseCache::solution_key(cls, 0.8, w, t.subsystem(1).reward) != key);

  const auto fk = ReuseCache::flow_key(cls, 0.9, w);
  cache.add_flow(fk, f.flow);
  cache.add_flow(fk, f.flow);
  CHECK(cache.flows(fk).size() == 1);
}

TEST_CASE("shared flows are re-validated before use") {
  const auto t = testing::coupled_xy();
  const auto& m2 = t.subsystem(1);
  const std::vector<double> w{1.0, 1.0};
  const auto key = ReuseCache::flow_key(class_signature(m2), 0.9, w);
  ReuseCache cache;
  const auto good = solve_standalone(m2, 0.9, m2.reward, w).flow;
  auto broken = good;
  broken[0] += 1.0;
  cache.add_flow(key, good);
  cache.add_flow(key, broken);

  LocalPolicyBank bank({t.sepset(1)});
  std::size_t cursor = 0;
  CHECK(share_flows(cache, key, cursor, m2, 0.9, w, bank) == 1);
  CHECK(cursor == 2);
  CHECK(bank.rows() == 1);
  CHECK(cache.ledger().flow_rows_donated == 1);
  CHECK(cache.ledger().flow_rows_rejected == 1);
  // Nothing new past the cursor.
  CHECK(share_flows(cache, key, cursor, m2, 0.9, w, bank) == 0);
}

TEST_CASE("subtree rows only move between equal signatures") {
  const auto g = twin_subtree_model(2, 3);
  const auto& t = g.tree;
  const auto s0 = subtree_signature(t, g.weights, *t.index_of("A0"));
  const auto s1 = subtree_signature(t, g.weights, *t.index_of("A1"));
  const auto root = subtree_signature(t, g.weights, t.root());
  ReuseCache cache;
  cache.add_subtree_row(s0, SubtreeRow{5.0, {1.0, 1.0}});
  std::size_t cursor = 0;
  const auto rows = share_subtree_rows(cache, s0, s1, cursor);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].value == 5.0);
  std::size_t c2 = 0;
  CHECK_THROWS_AS(share_subtree_rows(cache, s0, root, c2), InputError);
}

TEST_CASE("cache files round-trip and reject foreign data") {
  const auto t = testing::coupled_xy();
  const std::vector<double> w{1.0, 1.0};
  ReuseCache cache;
  const auto cls = class_signature(t.subsystem(1));
  const auto f = solve_standalone(t.subsystem(1), 0.9, t.subsystem(1).reward, w);
  const auto key = ReuseCache::solution_key(cls, 0.9, w, t.subsystem(1).reward);
  cache.store_solution(key, f);
  cache.add_flow(ReuseCache::flow_key(cls, 0.9, w), f.flow);
  const auto sig = subtree_signature(t, RelevanceWeights::ones(t), 1);
  cache.add_subtree_row(sig, SubtreeRow{190.0, {0.0, 20.0}});

  std::stringstream ss;
  cache.save(ss);
  const std::string first = ss.str();
  const ReuseCache back = ReuseCache::load(ss);
  REQUIRE(back.find_solution(key) != nullptr);
  CHECK(back.find_solution(key)->flow == f.flow);
  CHECK(back.subtree_rows(sig).size() == 1);
  std::stringstream again;
  back.save(again);
  CHECK(again.str() == first);

  std::stringstream junk("{\"format\": \"something-else\", \"version\": 1}");
  CHECK_THROWS_AS(ReuseCache::load(junk), InputError);
  std::stringstream future("{\"format\": \"hfmdp-reuse-cache\", \"version\": 99}");
  CHECK_THROWS_AS(ReuseCache::load(future), InputError);
  std::stringstream garbage("not json");
  CHECK_THROWS_AS(ReuseCache::load(garbage), InputError);
}

TEST_CASE("reuse keeps the objective and saves stand-alone solves") {
  for (std::size_t twins : {2u, 3u}) {
    const auto g = twin_subtree_model(twins, 5);
    PlannerConfig off;
    const auto plain = run_planner(g.tree, g.weights, off);
    ReuseCache cache;
    PlannerConfig on;
    on.cache = &cache;
    const auto reused = run_planner(g.tree, g.weights, on);
    CHECK(std::abs(plain.objective - reused.objective) <= 1e-9);
    CHECK(reused.counters.standalone_solves < plain.counters.standalone_solves);
    CHECK(reused.counters.memo_hits > 0);
    CHECK(cache.ledger().standalone_solves_avoided == reused.counters.memo_hits);
  }
}

TEST_CASE("a warm cache from an earlier run avoids more work") {
  const auto m = load_model(testing::model_path("twin_cylinders.hmdp"));
  ReuseCache cache;
  PlannerConfig cfg;
  cfg.cache = &cache;
  const auto cold = run_planner(m.tree, m.weights, cfg);
  std::stringstream ss;
  cache.save(ss);
  ReuseCache warm_cache = ReuseCache::load(ss);
  cfg.cache = &warm_cache;
  const auto warm = run_planner(m.tree, m.weights, cfg);
  CHECK(std::abs(cold.objective - warm.objective) <= 1e-9);
  CHECK(warm.counters.standalone_solves < cold.counters.standalone_solves);
}
