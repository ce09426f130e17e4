#include "hfmdp/local_planner.hpp"

#include <algorithm>
#include <cmath>

#include "hfmdp/errors.hpp"

namespace hfmdp {

RewardMessage RewardMessage::zero(const Scope& separator) {
  return RewardMessage{separator, std::vector<double>(separator.assignment_count(), 0.0)};
}

double RewardMessage::max_abs_difference(const RewardMessage& other) const {
  if (values.size() != other.values.size()) return kInf;
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) d = std::max(d, std::abs(values[i] - other.values[i]));
  return d;
}

std::vector<double> adjusted_reward(const SubsystemTree& tree, std::size_t j, const RewardMessage& own,
                                    std::span<const RewardMessage> child_messages) {
  const auto& s = tree.subsystem(j);
  const Scope& scope = tree.scope(j);
  const auto& children = tree.children(j);
  if (child_messages.size() != children.size())
    throw InputError("subsystem '" + s.name + "' expects " + std::to_string(children.size()) +
                     " child messages, got " + std::to_string(child_messages.size()));
  std::vector<double> r = s.reward;
  auto apply = [&](const RewardMessage& msg, double sign) {
    if (msg.values.size() != msg.separator.assignment_count())
      throw InputError("reward message for '" + s.name + "' has the wrong dimension");
    const auto proj = projection(scope, msg.separator);
    for (std::size_t z = 0; z < r.size(); ++z) r[z] += sign * msg.values[proj[z]];
  };
  for (const auto& m : child_messages) apply(m, +1.0);
  apply(own, -1.0);
  return r;
}

FlowSolution solve_standalone(const BasicSubsystem& subsystem, double discount, std::span<const double> reward,
                              std::span<const double> weights, const SimplexOptions& options) {
  const Scope scope = subsystem.scope();
  const std::size_t nz = scope.assignment_count();
  const std::size_t nx = subsystem.internal_size();
  if (reward.size() != nz || weights.size() != nx)
    throw InputError("stand-alone MDP for '" + subsystem.name + "' got mis-sized reward or weights");

  const auto to_internal = projection(scope, subsystem.internal);
  LinearProgram lp = LinearProgram::with_variables(static_cast<Eigen::Index>(nz));
  lp.a_eq = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nz));
  lp.b_eq.resize(static_cast<Eigen::Index>(nx));
  for (std::size_t x = 0; x < nx; ++x) lp.b_eq(static_cast<Eigen::Index>(x)) = weights[x];
  for (std::size_t z = 0; z < nz; ++z) {
    const auto col = static_cast<Eigen::Index>(z);
    lp.cost(col) = -reward[z];
    lp.a_eq(static_cast<Eigen::Index>(to_internal[z]), col) += 1.0;
    for (std::size_t x = 0; x < nx; ++x)
      lp.a_eq(static_cast<Eigen::Index>(x), col) -= discount * subsystem.probability(z, x);
  }

  LpSolution sol;
  try {
    sol = solve(lp, options);
  } catch (const SolverError& e) {
    throw SolverError("stand-alone MDP for '" + subsystem.name + "': " + e.what());
  }
  if (sol.status != LpStatus::Optimal)
    throw SolverError("stand-alone MDP for '" + subsystem.name + "' is " + to_string(sol.status));

  FlowSolution out;
  out.flow.assign(sol.primal.data(), sol.primal.data() + sol.primal.size());
  for (double& f : out.flow) f = std::max(f, 0.0);
  out.value.resize(nx);
  for (std::size_t x = 0; x < nx; ++x) out.value[x] = -sol.dual(static_cast<Eigen::Index>(x));
  out.adjusted_objective = -sol.objective;
  out.iterations = sol.iterations;
  return out;
}

double local_value_entry(const FlowSolution& flow, std::span<const double> reward) {
  double v = 0.0;
  for (std::size_t z = 0; z < flow.flow.size(); ++z) v += reward[z] * flow.flow[z];
  return v;
}

std::vector<double> marginalize_flow(std::span<const double> flow, const Scope& scope, const Scope& sep) {
  if (!sep.subset_of(scope)) throw ScopeError("separator is not contained in the subsystem scope");
  const auto proj = projection(scope, sep);
  std::vector<double> out(sep.assignment_count(), 0.0);
  for (std::size_t z = 0; z < flow.size(); ++z) out[proj[z]] += flow[z];
  return out;
}

double conservation_residual(const BasicSubsystem& subsystem, double discount, std::span<const double> flow,
                             std::span<const double> weights) {
  const Scope scope = subsystem.scope();
  const std::size_t nx = subsystem.internal_size();
  const auto to_internal = projection(scope, subsystem.internal);
  std::vector<double> lhs(nx, 0.0);
  for (std::size_t z = 0; z < flow.size(); ++z) {
    lhs[to_internal[z]] += flow[z];
    for (std::size_t x = 0; x < nx; ++x) lhs[x] -= discount * subsystem.probability(z, x) * flow[z];
  }
  double worst = 0.0;
  for (std::size_t x = 0; x < nx; ++x) worst = std::max(worst, std::abs(lhs[x] - weights[x]));
  return worst;
}

namespace {

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)}); }

bool near(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!near(a[i], b[i], tol)) return false;
  return true;
}

}  // namespace

LocalPolicyBank::LocalPolicyBank(std::vector<Scope> separators) : separators_(std::move(separators)) {}

bool LocalPolicyBank::record(double value, std::vector<std::vector<double>> marginals, double tolerance) {
  if (marginals.size() != separators_.size()) throw InputError("policy row has the wrong number of marginals");
  for (std::size_t r = 0; r < values_.size(); ++r) {
    if (!near(values_[r], value, tolerance)) continue;
    bool same = true;
    for (std::size_t s = 0; s < separators_.size() && same; ++s) same = near(marginals_[r][s], marginals[s], tolerance);
    if (same) return false;
  }
  values_.push_back(value);
  marginals_.push_back(std::move(marginals));
  return true;
}

bool record_policy(LocalPolicyBank& bank, const FlowSolution& flow, const Scope& scope,
                   std::span<const double> reward, double tolerance) {
  std::vector<std::vector<double>> marginals;
  marginals.reserve(bank.separators().size());
  for (const auto& sep : bank.separators()) marginals.push_back(marginalize_flow(flow.flow, scope, sep));
  return bank.record(local_value_entry(flow, reward), std::move(marginals), tolerance);
}

bool SubtreePolicyBank::record(double value, std::vector<double> frequencies, double tolerance) {
  if (frequencies.size() != separator_.assignment_count())
    throw InputError("subtree policy row has the wrong dimension");
  for (std::size_t r = 0; r < values_.size(); ++r)
    if (near(values_[r], value, tolerance) && near(rows_[r], frequencies, tolerance)) return false;
  values_.push_back(value);
  rows_.push_back(std::move(frequencies));
  return true;
}

}  // namespace hfmdp
