#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <sstream>

#include "hfmdp/errors.hpp"
#include "hfmdp/lp.hpp"

using namespace hfmdp;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("textbook LP with ≥ rows") {
  // min 2x + 3y  s.t.  x + y ≥ 4,  x + 3y ≥ 6,  x, y ≥ 0  → (3, 1), 9
  LinearProgram lp = LinearProgram::with_variables(2);
  lp.cost = vec({2, 3});
  lp.add_ge(vec({1, 1}), 4);
  lp.add_ge(vec({1, 3}), 6);
  const auto s = solve(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(9));
  CHECK(s.primal[0] == doctest::Approx(3));
  CHECK(s.primal[1] == doctest::Approx(1));
  CHECK(s.dual[0] == doctest::Approx(1.5));
  CHECK(s.dual[1] == doctest::Approx(0.5));
  CHECK(s.dual_objective == doctest::Approx(s.objective));
  CHECK(s.reduced_cost.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("equality rows, free variables and finite bounds") {
  // min x − y  s.t.  x + y = 2,  x free,  0 ≤ y ≤ 1.5  → x = 0.5, y = 1.5
  LinearProgram lp = LinearProgram::with_variables(2);
  lp.cost = vec({1, -1});
  lp.add_eq(vec({1, 1}), 2);
  lp.set_free(0);
  lp.set_bounds(1, 0, 1.5);
  const auto s = solve(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.primal[0] == doctest::Approx(0.5));
  CHECK(s.primal[1] == doctest::Approx(1.5));
  CHECK(s.objective == doctest::Approx(-1.0));
  CHECK(s.dual_eq(0)[0] == doctest::Approx(1.0));
  // The upper bound on y carries the remaining reduced cost.
  CHECK(s.reduced_cost[1] == doctest::Approx(-2.0));
  CHECK(s.dual_objective == doctest::Approx(s.objective));
}

TEST_CASE("unbounded LPs report an improving ray") {
  LinearProgram lp = LinearProgram::with_variables(2);
  lp.cost = vec({-1, 0});
  lp.add_ge(vec({1, -1}), -1);
  const auto s = solve(lp);
  REQUIRE(s.status == LpStatus::Unbounded);
  REQUIRE(s.ray.size() == 2);
  CHECK(lp.cost.dot(s.ray) < 0);
  CHECK((lp.a_ge * s.ray)[0] >= -1e-12);
  CHECK(s.ray.minCoeff() >= -1e-12);
}

TEST_CASE("infeasible LPs") {
  LinearProgram lp = LinearProgram::with_variables(1);
  lp.cost = vec({1});
  lp.add_ge(vec({1}), 2);
  lp.set_bounds(0, 0, 1);
  CHECK(solve(lp).status == LpStatus::Infeasible);

  LinearProgram eq = LinearProgram::with_variables(2);
  eq.cost = vec({1, 1});
  eq.add_eq(vec({1, 1}), 1);
  eq.add_eq(vec({1, 1}), 2);
  CHECK(solve(eq).status == LpStatus::Infeasible);
}

TEST_CASE("malformed LPs and iteration caps") {
  LinearProgram lp = LinearProgram::with_variables(2);
  lp.cost = vec({1, 1});
  CHECK_THROWS_AS(lp.add_ge(vec({1}), 1), InputError);
  lp.add_ge(vec({1, 1}), std::nan(""));
  CHECK_THROWS_AS(solve(lp), InputError);

  LinearProgram ok = LinearProgram::with_variables(2);
  ok.cost = vec({2, 3});
  ok.add_ge(vec({1, 1}), 4);
  ok.add_ge(vec({1, 3}), 6);
  SimplexOptions capped;
  capped.max_iterations = 1;
  CHECK_THROWS_AS(solve(ok, capped), SolverError);
}

TEST_CASE("degenerate LP terminates under Bland's rule") {
  // Classic cycling example (Beale); the optimum is −0.05.
  LinearProgram lp = LinearProgram::with_variables(4);
  lp.cost = vec({-0.75, 150, -0.02, 6});
  lp.add_ge(-vec({0.25, -60, -0.04, 9}), 0);
  lp.add_ge(-vec({0.5, -90, -0.02, 3}), 0);
  lp.add_ge(-vec({0, 0, 1, 0}), -1);
  const auto s = solve(lp);
  REQUIRE(s.status == LpStatus::Optimal);
  CHECK(s.objective == doctest::Approx(-0.05));
}

TEST_CASE("random feasible bounded LPs close the duality gap") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 2 + trial % 5, m = 2 + (trial / 5) % 5;
    LinearProgram lp = LinearProgram::with_variables(n);
    // Positive costs keep the minimum bounded over x ≥ 0.
    for (Eigen::Index j = 0; j < n; ++j) lp.cost[j] = 0.1 + std::abs(u(rng));
    for (Eigen::Index i = 0; i < m; ++i) {
      VectorXd row(n);
      for (Eigen::Index j = 0; j < n; ++j) row[j] = u(rng);
      lp.add_ge(row, u(rng));
    }
    const auto s = solve(lp);
    if (s.status != LpStatus::Optimal) continue;
    CHECK(std::abs(s.objective - s.dual_objective) <= 1e-7);
    CHECK(s.dual.minCoeff() >= -1e-9);
    CHECK((lp.a_ge * s.primal - lp.b_ge).minCoeff() >= -1e-9);
  }
}

TEST_CASE("solves are deterministic") {
  LinearProgram lp = LinearProgram::with_variables(3);
  lp.cost = vec({1, 1, 1});
  lp.add_ge(vec({1, 1, 0}), 1);
  lp.add_ge(vec({0, 1, 1}), 1);
  const auto a = solve(lp), b = solve(lp);
  CHECK(a.primal == b.primal);
  CHECK(a.dual == b.dual);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("LP text dump") {
  LinearProgram lp = LinearProgram::with_variables(2);
  lp.cost = vec({1, -2});
  lp.add_ge(vec({1, 1}), 1);
  lp.names = {"theta", "s_0"};
  std::ostringstream os;
  write_lp_format(os, lp);
  const std::string text = os.str();
  CHECK(text.find("theta") != std::string::npos);
  CHECK(text.find("s_0") != std::string::npos);
  CHECK(std::string(to_string(LpStatus::Unbounded)) == "unbounded");
}
