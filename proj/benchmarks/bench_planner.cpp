#include <random>

#include <benchmark/benchmark.h>

#include "hfmdp/action_selection.hpp"
#include "hfmdp/coordinator.hpp"
#include "hfmdp/generators.hpp"
#include "hfmdp/local_planner.hpp"
#include "hfmdp/lp.hpp"
#include "hfmdp/oracle.hpp"

using namespace hfmdp;

namespace {

LinearProgram dense_lp(Eigen::Index n) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  LinearProgram lp = LinearProgram::with_variables(n);
  for (Eigen::Index j = 0; j < n; ++j) lp.cost[j] = u(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd row(n);
    for (Eigen::Index j = 0; j < n; ++j) row[j] = u(rng);
    lp.add_ge(row, 1.0);
  }
  return lp;
}

void BM_SimplexDense(benchmark::State& state) {
  const auto lp = dense_lp(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(solve(lp).objective);
}
BENCHMARK(BM_SimplexDense)->Arg(8)->Arg(32)->Arg(64);

void BM_StandaloneSolve(benchmark::State& state) {
  const auto g = chain_model(3, 2);
  const auto& s = g.tree.subsystem(1);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_standalone(s, g.tree.discount(), s.reward, g.weights[1]).adjusted_objective);
}
BENCHMARK(BM_StandaloneSolve);

void BM_PlannerRandomTree(benchmark::State& state) {
  const auto g = random_tree(static_cast<std::uint64_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_planner(g.tree, g.weights).objective);
}
BENCHMARK(BM_PlannerRandomTree)->DenseRange(0, 3);

void BM_PlannerChain(benchmark::State& state) {
  const auto g = chain_model(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(run_planner(g.tree, g.weights).objective);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PlannerChain)->DenseRange(2, 10, 2)->Complexity();

void BM_CentralizedChain(benchmark::State& state) {
  const auto g = chain_model(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(centralized_factored_lp(g.tree, g.weights).objective);
}
BENCHMARK(BM_CentralizedChain)->DenseRange(2, 10, 2);

void BM_SelectActionChain(benchmark::State& state) {
  const auto g = chain_model(static_cast<std::size_t>(state.range(0)), 1);
  std::vector<std::vector<double>> values;
  for (const auto& s : g.tree.subsystems()) values.emplace_back(s.internal_size(), 1.0);
  const auto q = compute_q(g.tree, values);
  const auto start = assignment_at(g.tree.internal_vars(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(select_action(g.tree, q, start).values.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SelectActionChain)->DenseRange(2, 12, 2)->Complexity(benchmark::oN);

}  // namespace
BENCHMARK_MAIN();
