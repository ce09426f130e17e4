#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "hfmdp/generators.hpp"
#include "hfmdp/model_io.hpp"
#include "hfmdp/oracle.hpp"

using namespace hfmdp;

TEST_CASE("exact Bellman LP of the coupled example") {
  const auto t = testing::coupled_xy();
  const auto mdp = build_equivalent_mdp(t);
  const auto alpha = global_relevance_weights(t, RelevanceWeights::ones(t));
  const auto ex = exact_bellman_lp(mdp, alpha);
  REQUIRE(ex.value.size() == 4);
  CHECK(ex.value[0] == doctest::Approx(54.0));
  CHECK(ex.value[1] == doctest::Approx(64.0));
  CHECK(ex.value[2] == doctest::Approx(60.0));
  CHECK(ex.value[3] == doctest::Approx(70.0));
  CHECK(ex.objective == doctest::Approx(124.0));

  const auto fl = exact_dual_flows(mdp, alpha);
  CHECK(fl.objective == doctest::Approx(124.0));
  for (std::size_t s = 0; s < 4; ++s) CHECK(fl.value[s] == doctest::Approx(ex.value[s]));
  double mass = 0.0;
  for (double f : fl.flows) {
    CHECK(f >= -1e-12);
    mass += f;
  }
  CHECK(mass == doctest::Approx(2.0 / (1.0 - 0.9)));

  const auto pi = greedy_policy(mdp, ex.value);
  const auto v = evaluate_policy(mdp, pi);
  for (std::size_t s = 0; s < 4; ++s) CHECK(v[s] == doctest::Approx(ex.value[s]));
  // From x = 1 the greedy action keeps x on and switches y on (a = b = 1).
  CHECK(pi[2] == 3);
}

TEST_CASE("centralized factored LP of the coupled example") {
  const auto t = testing::coupled_xy();
  const auto c = centralized_factored_lp(t, RelevanceWeights::ones(t));
  CHECK(c.objective == doctest::Approx(124.0));
  const double joint[4] = {c.values[0][0] + c.values[1][0], c.values[0][0] + c.values[1][1],
                           c.values[0][1] + c.values[1][0], c.values[0][1] + c.values[1][1]};
  CHECK(joint[0] == doctest::Approx(54.0));
  CHECK(joint[1] == doctest::Approx(64.0));
  CHECK(joint[2] == doctest::Approx(60.0));
  CHECK(joint[3] == doctest::Approx(70.0));
  CHECK(c.messages[0].size() == 0);
  CHECK(c.messages[1][1] - c.messages[1][0] == doctest::Approx(9.0));
  CHECK(c.lp.names.front() == "V_M1_0");
  // The optimum does not depend on the box once it is loose enough.
  CHECK(centralized_factored_lp(t, RelevanceWeights::ones(t), 50.0).objective == doctest::Approx(124.0));
}

TEST_CASE("frozen oracle values") {
  struct Case {
    const char* name;
    SubsystemTree tree;
    RelevanceWeights weights;
    double centralized;
    double exact;
  };
  std::vector<Case> cases;
  auto add = [&](const char* name, SubsystemTree t, RelevanceWeights w, double c, double e) {
    cases.push_back({name, std::move(t), std::move(w), c, e});
  };
  const auto chain = testing::small_chain();
  add("small_chain", chain, RelevanceWeights::ones(chain), 74.059246775214888, 70.465953171720628);
  for (const char* file : {"engine.hmdp", "twin_cylinders.hmdp"}) {
    auto m = load_model(testing::model_path(file));
    const bool engine = std::string(file) == "engine.hmdp";
    add(file, m.tree, m.weights, engine ? -11.379075355492205 : 89.522271624409001,
        engine ? -14.141557938590415 : 83.789380253535469);
  }
  const double rc[] = {31.154795509977703, 126.91041343731376, 69.499999999999091, 126.11323774975608,
                       69.368345810015398};
  const double re[] = {29.784906502720972, 120.77997572069715, 69.250000000000071, 124.23783812181377,
                       69.368345810008691};
  for (int s = 0; s < 5; ++s) {
    auto g = random_tree(static_cast<std::uint64_t>(s));
    add("random_tree", g.tree, g.weights, rc[s], re[s]);
  }
  {
    auto g = chain_model(4, 1);
    add("chain_model", g.tree, g.weights, 149.78974284409742, 147.84722635430819);
  }
  {
    auto g = twin_subtree_model(2, 3);
    add("twin_subtree_model", g.tree, g.weights, 385.19891221707445, 319.52329538049321);
  }
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const double central = centralized_factored_lp(c.tree, c.weights).objective;
    const auto mdp = build_equivalent_mdp(c.tree);
    const double exact = exact_bellman_lp(mdp, global_relevance_weights(c.tree, c.weights)).objective;
    CHECK(std::abs(central - c.centralized) <= 1e-6);
    CHECK(std::abs(exact - c.exact) <= 1e-6);
    // A restricted value class can only over-estimate the exact optimum.
    CHECK(central >= exact - 1e-7);
  }
}

TEST_CASE("primal and flow forms agree on random trees") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    const auto g = random_tree(seed);
    const auto mdp = build_equivalent_mdp(g.tree);
    const auto alpha = global_relevance_weights(g.tree, g.weights);
    const auto p = exact_bellman_lp(mdp, alpha), d = exact_dual_flows(mdp, alpha);
    CHECK(p.objective == doctest::Approx(d.objective).epsilon(1e-9));
  }
}

TEST_CASE("feasibility check of factored values") {
  const auto t = testing::coupled_xy();
  const auto c = centralized_factored_lp(t, RelevanceWeights::ones(t));
  const auto ok = check_global_feasibility(t, c.values);
  CHECK_FALSE(ok.sampled);
  CHECK(ok.constraints_checked == 16);
  CHECK(ok.max_violation <= 1e-7);

  auto low = c.values;
  low[1][1] -= 5.0;
  CHECK(check_global_feasibility(t, low).max_violation > 0.4);

  const auto big = chain_model(12, 0);
  std::vector<std::vector<double>> zeros;
  for (const auto& s : big.tree.subsystems()) zeros.emplace_back(s.internal_size(), 0.0);
  const auto sampled = check_global_feasibility(big.tree, zeros, 500, 3);
  CHECK(sampled.sampled);
  CHECK(sampled.constraints_checked == 500);
}

TEST_CASE("exact oracles respect their cap") {
  const auto big = chain_model(12, 0);
  CHECK_THROWS_AS(build_equivalent_mdp(big.tree), OracleCapError);
}
