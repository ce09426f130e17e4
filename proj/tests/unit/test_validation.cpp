#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "hfmdp/generators.hpp"
#include "hfmdp/validation.hpp"

using namespace hfmdp;

namespace {

/// Two subsystems sharing internal w. w′ = 1 with probability
/// base + slope·a in each; x and y follow their own state.
SubsystemTree shared_pair(double base1, double slope1, double base2, double slope2) {
  auto vars = std::make_shared<VariableSet>();
  for (const char* n : {"w", "x", "y", "a"}) vars->add(n, {"0", "1"});
  auto make = [&](const char* name, const char* own, double base, double slope) {
    BasicSubsystem s{name, vars->scope({"w", std::string_view(own)}), vars->scope({"a"}), {}, {}, ""};
    const Scope sc = s.scope();  // (w, own, a)
    for (AssignmentCursor c(sc); !c.done(); c.next()) {
      const auto own_v = c.values()[1], a = c.values()[2];
      s.reward.push_back(own_v + 0.5 * c.values()[0] - 0.25 * a);
      const double pw = base + slope * a, po = own_v ? 0.8 : 0.3;
      for (int w2 = 0; w2 < 2; ++w2)
        for (int o2 = 0; o2 < 2; ++o2) s.transition.push_back((w2 ? pw : 1 - pw) * (o2 ? po : 1 - po));
    }
    return s;
  };
  return SubsystemTree(vars, {make("S1", "x", base1, slope1), make("S2", "y", base2, slope2)}, {std::nullopt, 0}, 0.9);
}

/// A - B - C where C also reads A's action u, which B never sees.
SubsystemTree broken_running_intersection() {
  const SubsystemTree chain = testing::small_chain();
  auto subs = chain.subsystems();
  auto& c = subs[2];
  const auto& vars = chain.variables();
  c.external = vars.scope({"q", "u", "w"});
  const Scope sc = c.scope();
  c.reward.assign(sc.assignment_count(), 1.0);
  c.transition.clear();
  for (std::size_t z = 0; z < sc.assignment_count(); ++z) c.transition.insert(c.transition.end(), {0.5, 0.5});
  return SubsystemTree(chain.variables_ptr(), subs, {std::nullopt, 0, 1}, 0.9);
}

}  // namespace

TEST_CASE("bundled example trees are consistent") {
  const auto xy = testing::coupled_xy();
  CHECK(validate(xy).clean());
  const auto ones = RelevanceWeights::ones(xy);
  CHECK(validate(xy, &ones).clean());
  CHECK(validate(testing::small_chain()).clean());
  CHECK(validate(shared_pair(0.2, 0.6, 0.2, 0.6)).clean());
}

TEST_CASE("running intersection violations name the variable and the gap") {
  const auto report = check_running_intersection(broken_running_intersection());
  REQUIRE_FALSE(report.clean());
  CHECK(report.count(ViolationKind::RunningIntersection) == 1);
  const auto& v = report.violations.front();
  CHECK(v.variables == std::vector<std::string>{"u"});
  CHECK(std::find(v.subsystems.begin(), v.subsystems.end(), "B") != v.subsystems.end());
  // Dynamics are not checked when the structure is already broken.
  CHECK(validate(broken_running_intersection()).count(ViolationKind::Dynamics) == 0);
}

TEST_CASE("normalisation: one violation per subsystem with the worst deviation") {
  const auto good = testing::coupled_xy();
  auto subs = good.subsystems();
  subs[1].transition[0] = 0.7;  // row sums to 0.7
  subs[1].transition[2] = 0.9;  // row sums to 0.9
  const SubsystemTree bad(good.variables_ptr(), subs, {std::nullopt, 0}, 0.9);
  const auto report = check_normalization(bad);
  REQUIRE(report.count(ViolationKind::Normalization) == 1);
  CHECK(report.violations[0].subsystems == std::vector<std::string>{"M2"});
  CHECK(report.violations[0].magnitude == doctest::Approx(0.3));

  subs[1].transition[0] = -0.1;
  subs[1].transition[1] = 1.1;
  subs[1].transition[2] = 1.0;
  const SubsystemTree negative(good.variables_ptr(), subs, {std::nullopt, 0}, 0.9);
  CHECK(check_normalization(negative).count(ViolationKind::Normalization) == 1);
}

TEST_CASE("consistent dynamics compares shared-internal marginals per edge") {
  CHECK(check_consistent_dynamics(shared_pair(0.2, 0.6, 0.2, 0.6)).clean());
  const auto report = check_consistent_dynamics(shared_pair(0.2, 0.6, 0.2, 0.5));
  REQUIRE(report.count(ViolationKind::Dynamics) == 1);
  CHECK(report.violations[0].magnitude == doctest::Approx(0.1));
  CHECK(report.violations[0].variables == std::vector<std::string>{"w"});
}

TEST_CASE("relevance weights must agree on shared internals and total mass") {
  const auto t = shared_pair(0.2, 0.6, 0.2, 0.6);
  CHECK(check_relevance_weights(t, RelevanceWeights::ones(t)).clean());
  CHECK(check_relevance_weights(t, RelevanceWeights::uniform(t)).clean());
  RelevanceWeights w = RelevanceWeights::ones(t);
  w.per_subsystem[1] = {3, 0, 1, 0};
  CHECK(check_relevance_weights(t, w).count(ViolationKind::Weights) == 1);
  w.per_subsystem[1] = {1, -1, 1, 3};
  CHECK_FALSE(check_relevance_weights(t, w).clean());
  w.per_subsystem[1] = {1, 1};
  CHECK_THROWS_AS(check_relevance_weights(t, w), InputError);
  w.per_subsystem.pop_back();
  CHECK_THROWS_AS(check_relevance_weights(t, w), InputError);

  // Unequal internal sizes: all-ones weights carry unequal total mass.
  const auto engine_like = random_tree(3);
  const auto ones = RelevanceWeights::ones(engine_like.tree);
  bool sizes_differ = false;
  for (std::size_t j = 1; j < engine_like.tree.size(); ++j)
    sizes_differ |= engine_like.tree.subsystem(j).internal_size() != engine_like.tree.subsystem(0).internal_size();
  if (sizes_differ) CHECK_FALSE(check_relevance_weights(engine_like.tree, ones).clean());
  CHECK(check_relevance_weights(engine_like.tree, engine_like.weights).clean());
}

TEST_CASE("equivalent MDP of the coupled example") {
  const auto t = testing::coupled_xy();
  const auto mdp = build_equivalent_mdp(t);
  REQUIRE(mdp.states == 4);
  REQUIRE(mdp.actions == 4);
  // state index 2x + y, action index 2a + b
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t a = 0; a < 4; ++a) {
      const int x = static_cast<int>(s / 2), y = static_cast<int>(s % 2);
      const int act_a = static_cast<int>(a / 2), act_b = static_cast<int>(a % 2);
      CHECK(mdp.r(s, a) == -3.0 * x + 10.0 * y);
      const std::size_t next = static_cast<std::size_t>(2 * act_a + ((act_b && x) ? 1 : 0));
      for (std::size_t n = 0; n < 4; ++n) CHECK(mdp.p(s, a, n) == (n == next ? 1.0 : 0.0));
    }
  CHECK_THROWS_AS(build_equivalent_mdp(t, 15), OracleCapError);
}

TEST_CASE("joint dynamics divide out the shared marginal") {
  const auto t = shared_pair(0.2, 0.6, 0.2, 0.6);
  const auto mdp = build_equivalent_mdp(t);
  CHECK(mdp.states == 8);
  for (std::size_t s = 0; s < mdp.states; ++s)
    for (std::size_t a = 0; a < mdp.actions; ++a) {
      double sum = 0.0;
      for (std::size_t n = 0; n < mdp.states; ++n) sum += mdp.p(s, a, n);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("a zero shared marginal is a degenerate model, not a silent NaN") {
  const auto t = shared_pair(0.0, 1.0, 0.0, 1.0);
  try {
    (void)build_equivalent_mdp(t);
    FAIL("expected DegenerateModelError");
  } catch (const DegenerateModelError& e) {
    const std::string what = e.what();
    CHECK(what.find("w=") != std::string::npos);
  }
}

TEST_CASE("global relevance weights reproduce the subsystem marginals") {
  const auto xy = testing::coupled_xy();
  const auto alpha = global_relevance_weights(xy, RelevanceWeights::ones(xy));
  CHECK(alpha == std::vector<double>{0.5, 0.5, 0.5, 0.5});

  const auto t = shared_pair(0.2, 0.6, 0.2, 0.6);
  RelevanceWeights w = RelevanceWeights::ones(t);
  w.per_subsystem[0] = {0.1, 0.3, 0.2, 0.4};  // (w, x)
  w.per_subsystem[1] = {0.25, 0.15, 0.35, 0.25};  // (w, y); w-marginal 0.4, 0.6
  const auto a = global_relevance_weights(t, w);
  REQUIRE(a.size() == 8);  // (w, x, y)
  for (int wv = 0; wv < 2; ++wv)
    for (int x = 0; x < 2; ++x) CHECK(a[4 * wv + 2 * x] + a[4 * wv + 2 * x + 1] == doctest::Approx(w[0][2 * wv + x]));
  CHECK(std::accumulate(a.begin(), a.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("violation kinds have stable names") {
  CHECK(std::string(to_string(ViolationKind::RunningIntersection)) == "running-intersection");
  CHECK(std::string(to_string(ViolationKind::Weights)) == "weights");
}
