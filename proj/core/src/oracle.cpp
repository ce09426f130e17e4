#include "hfmdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hfmdp/coordinator.hpp"
#include "hfmdp/errors.hpp"

namespace hfmdp {

namespace {

// Above this many tableau cells the primal form is replaced by the flow form.
constexpr std::size_t kPrimalTableauCells = std::size_t{1} << 22;

void check_alpha(const EquivalentMdp& mdp, const std::vector<double>& alpha) {
  if (alpha.size() != mdp.states) throw InputError("relevance weights do not match the state count");
  for (double a : alpha)
    if (!std::isfinite(a) || a < 0.0) throw InputError("relevance weights must be finite and nonnegative");
}

}  // namespace

std::vector<std::size_t> greedy_policy(const EquivalentMdp& mdp, const std::vector<double>& value) {
  std::vector<std::size_t> policy(mdp.states, 0);
  for (std::size_t s = 0; s < mdp.states; ++s) {
    std::vector<double> q(mdp.actions);
    double best = -kInf;
    for (std::size_t a = 0; a < mdp.actions; ++a) {
      double f = 0.0;
      for (std::size_t n = 0; n < mdp.states; ++n) f += mdp.p(s, a, n) * value[n];
      q[a] = mdp.r(s, a) + mdp.discount * f;
      best = std::max(best, q[a]);
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(best));
    for (std::size_t a = 0; a < mdp.actions; ++a) {
      if (q[a] >= best - tol) {
        policy[s] = a;
        break;
      }
    }
  }
  return policy;
}

std::vector<double> evaluate_policy(const EquivalentMdp& mdp, const std::vector<std::size_t>& policy) {
  const auto n = static_cast<Eigen::Index>(mdp.states);
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd r(n);
  for (std::size_t s = 0; s < mdp.states; ++s) {
    r(static_cast<Eigen::Index>(s)) = mdp.r(s, policy[s]);
    for (std::size_t t = 0; t < mdp.states; ++t)
      m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) -= mdp.discount * mdp.p(s, policy[s], t);
  }
  const Eigen::VectorXd v = m.partialPivLu().solve(r);
  return {v.data(), v.data() + v.size()};
}

ExactSolution exact_dual_flows(const EquivalentMdp& mdp, const std::vector<double>& alpha,
                               const SimplexOptions& options) {
  check_alpha(mdp, alpha);
  const std::size_t ns = mdp.states, na = mdp.actions;
  LinearProgram lp = LinearProgram::with_variables(static_cast<Eigen::Index>(ns * na));
  lp.a_eq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(ns * na));
  lp.b_eq = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(ns));
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const auto col = static_cast<Eigen::Index>(s * na + a);
      lp.cost(col) = -mdp.r(s, a);
      lp.a_eq(static_cast<Eigen::Index>(s), col) += 1.0;
      for (std::size_t n = 0; n < ns; ++n) lp.a_eq(static_cast<Eigen::Index>(n), col) -= mdp.discount * mdp.p(s, a, n);
    }
  }
  const LpSolution sol = solve(lp, options);
  if (sol.status != LpStatus::Optimal) throw SolverError(std::string("flow LP is ") + to_string(sol.status));
  ExactSolution out;
  out.flows.assign(sol.primal.data(), sol.primal.data() + sol.primal.size());
  out.value.resize(ns);
  for (std::size_t s = 0; s < ns; ++s) out.value[s] = -sol.dual(static_cast<Eigen::Index>(s));
  out.objective = -sol.objective;
  out.policy = greedy_policy(mdp, out.value);
  return out;
}

ExactSolution exact_bellman_lp(const EquivalentMdp& mdp, const std::vector<double>& alpha,
                               const SimplexOptions& options) {
  check_alpha(mdp, alpha);
  const std::size_t ns = mdp.states, na = mdp.actions;
  const std::size_t rows = ns * na;
  if (rows * (rows + ns) > kPrimalTableauCells) {
    ExactSolution dual = exact_dual_flows(mdp, alpha, options);
    dual.flows.clear();
    return dual;
  }
  double rmax = 0.0;
  for (double r : mdp.reward) rmax = std::max(rmax, r);
  LinearProgram lp = LinearProgram::with_variables(static_cast<Eigen::Index>(ns));
  // V* ≤ max R/(1−γ); the upper bound lets every row start feasible from
  // its slack, so the solver skips phase one.
  const double upper = std::max(0.0, rmax) / (1.0 - mdp.discount) + 1.0;
  for (std::size_t s = 0; s < ns; ++s) {
    lp.cost(static_cast<Eigen::Index>(s)) = alpha[s];
    lp.set_bounds(static_cast<Eigen::Index>(s), -kInf, upper);
  }
  lp.a_ge = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(ns));
  lp.b_ge.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const auto row = static_cast<Eigen::Index>(s * na + a);
      lp.a_ge(row, static_cast<Eigen::Index>(s)) += 1.0;
      for (std::size_t n = 0; n < ns; ++n) lp.a_ge(row, static_cast<Eigen::Index>(n)) -= mdp.discount * mdp.p(s, a, n);
      lp.b_ge(row) = mdp.r(s, a);
    }
  }
  const LpSolution sol = solve(lp, options);
  if (sol.status != LpStatus::Optimal) throw SolverError(std::string("Bellman LP is ") + to_string(sol.status));
  ExactSolution out;
  out.value.assign(sol.primal.data(), sol.primal.data() + sol.primal.size());
  out.objective = sol.objective;
  out.policy = greedy_policy(mdp, out.value);
  return out;
}

CentralizedFactoredSolution centralized_factored_lp(const SubsystemTree& tree, const RelevanceWeights& weights,
                                                    double message_bound, const SimplexOptions& options) {
  if (weights.size() != tree.size()) throw InputError("relevance weights do not match the tree");
  const double bound = message_bound > 0.0 ? message_bound : default_message_bound(tree);
  const std::size_t m = tree.size();
  std::vector<Eigen::Index> v_off(m), s_off(m);
  Eigen::Index n = 0;
  for (std::size_t j = 0; j < m; ++j) {
    v_off[j] = n;
    n += static_cast<Eigen::Index>(tree.subsystem(j).internal_size());
  }
  for (std::size_t j = 0; j < m; ++j) {
    s_off[j] = n;
    if (tree.parent(j)) n += static_cast<Eigen::Index>(tree.sepset(j).assignment_count());
  }

  CentralizedFactoredSolution out;
  LinearProgram& lp = out.lp;
  lp = LinearProgram::with_variables(n);
  lp.names.resize(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < m; ++j) {
    const auto& s = tree.subsystem(j);
    for (std::size_t x = 0; x < s.internal_size(); ++x) {
      const Eigen::Index col = v_off[j] + static_cast<Eigen::Index>(x);
      lp.cost(col) = weights[j].at(x);
      lp.set_free(col);
      lp.names[static_cast<std::size_t>(col)] = "V_" + s.name + "_" + std::to_string(x);
    }
    if (tree.parent(j)) {
      for (std::size_t z = 0; z < tree.sepset(j).assignment_count(); ++z) {
        const Eigen::Index col = s_off[j] + static_cast<Eigen::Index>(z);
        lp.set_bounds(col, -bound, bound);
        lp.names[static_cast<std::size_t>(col)] = "S_" + s.name + "_" + std::to_string(z);
      }
    }
  }

  std::size_t rows = 0;
  for (std::size_t j = 0; j < m; ++j) rows += tree.scope(j).assignment_count();
  lp.a_ge = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), n);
  lp.b_ge.resize(static_cast<Eigen::Index>(rows));
  Eigen::Index r = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto& s = tree.subsystem(j);
    const Scope& scope = tree.scope(j);
    const auto to_x = projection(scope, s.internal);
    const auto to_own = projection(scope, tree.sepset(j));
    std::vector<std::vector<std::size_t>> to_child;
    for (std::size_t k : tree.children(j)) to_child.push_back(projection(scope, tree.sepset(k)));
    for (std::size_t z = 0; z < scope.assignment_count(); ++z, ++r) {
      // V_j(x) − γ Σ P V_j − U_j(z) ≥ R_j(z)
      lp.a_ge(r, v_off[j] + static_cast<Eigen::Index>(to_x[z])) += 1.0;
      for (std::size_t x = 0; x < s.internal_size(); ++x)
        lp.a_ge(r, v_off[j] + static_cast<Eigen::Index>(x)) -= tree.discount() * s.probability(z, x);
      const auto& kids = tree.children(j);
      for (std::size_t i = 0; i < kids.size(); ++i)
        lp.a_ge(r, s_off[kids[i]] + static_cast<Eigen::Index>(to_child[i][z])) -= 1.0;
      if (tree.parent(j)) lp.a_ge(r, s_off[j] + static_cast<Eigen::Index>(to_own[z])) += 1.0;
      lp.b_ge(r) = s.reward[z];
    }
  }

  const LpSolution sol = solve(lp, options);
  if (sol.status != LpStatus::Optimal)
    throw SolverError(std::string("centralized factored LP is ") + to_string(sol.status));
  out.objective = sol.objective;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t nx = tree.subsystem(j).internal_size();
    out.values.emplace_back(sol.primal.data() + v_off[j], sol.primal.data() + v_off[j] + static_cast<Eigen::Index>(nx));
    const std::size_t nsep = tree.parent(j) ? tree.sepset(j).assignment_count() : 0;
    out.messages.emplace_back(sol.primal.data() + s_off[j], sol.primal.data() + s_off[j] + static_cast<Eigen::Index>(nsep));
  }
  for (std::size_t j = 0; j < m; ++j) {
    const Scope& scope = tree.scope(j);
    std::vector<double> u(scope.assignment_count(), 0.0);
    for (std::size_t k : tree.children(j)) {
      const auto proj = projection(scope, tree.sepset(k));
      for (std::size_t z = 0; z < u.size(); ++z) u[z] += out.messages[k][proj[z]];
    }
    if (tree.parent(j)) {
      const auto proj = projection(scope, tree.sepset(j));
      for (std::size_t z = 0; z < u.size(); ++z) u[z] -= out.messages[j][proj[z]];
    }
    out.adjustments.push_back(std::move(u));
  }
  return out;
}

FeasibilityReport check_global_feasibility(const SubsystemTree& tree, const std::vector<std::vector<double>>& values,
                                           std::size_t sample_budget, std::uint64_t seed) {
  if (values.size() != tree.size()) throw InputError("one value table per subsystem is required");
  JointDynamics dyn(tree);
  const std::size_t ns = dyn.state_count(), na = dyn.action_count(), m = tree.size();
  const double g = tree.discount();
  auto joint_value = [&](std::size_t s) {
    double v = 0.0;
    for (std::size_t j = 0; j < m; ++j) v += values[j][dyn.internal_index(j, s)];
    return v;
  };

  FeasibilityReport rep;
  if (ns * na <= kFeasibilityEnumerationCap) {
    std::vector<double> vnext(ns);
    for (std::size_t s = 0; s < ns; ++s) vnext[s] = joint_value(s);
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        const auto row = dyn.transition_row(s, a);
        double e = 0.0;
        for (std::size_t n = 0; n < ns; ++n) e += row[n] * vnext[n];
        rep.max_violation = std::max(rep.max_violation, dyn.reward(s, a) + g * e - vnext[s]);
        ++rep.constraints_checked;
      }
    }
    return rep;
  }
  // Sampling mode: the joint next-state marginal on Internal[M_j] is P_j, so
  // E[V_j(x′_j)] is a local sum.
  rep.sampled = true;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < sample_budget; ++i) {
    const std::size_t s = static_cast<std::size_t>(rng() % ns);
    const std::size_t a = static_cast<std::size_t>(rng() % na);
    double rhs = dyn.reward(s, a);
    for (std::size_t j = 0; j < m; ++j) {
      const auto& sub = tree.subsystem(j);
      const std::size_t z = dyn.local_index(j, s, a);
      double e = 0.0;
      for (std::size_t x = 0; x < sub.internal_size(); ++x) e += sub.probability(z, x) * values[j][x];
      rhs += g * e;
    }
    rep.max_violation = std::max(rep.max_violation, rhs - joint_value(s));
    ++rep.constraints_checked;
  }
  return rep;
}

}  // namespace hfmdp
