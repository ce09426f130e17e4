#include "hfmdp/validation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

namespace hfmdp {

const char* to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::RunningIntersection: return "running-intersection";
    case ViolationKind::Dynamics: return "dynamics";
    case ViolationKind::Normalization: return "normalization";
    case ViolationKind::Weights: return "weights";
  }
  return "unknown";
}

void ValidationReport::append(const ValidationReport& other) {
  violations.insert(violations.end(), other.violations.begin(), other.violations.end());
}

std::size_t ValidationReport::count(ViolationKind k) const {
  return static_cast<std::size_t>(
      std::count_if(violations.begin(), violations.end(), [k](const Violation& v) { return v.kind == k; }));
}

namespace {

std::vector<std::string> var_names(const VariableSet& vars, const Scope& s) {
  std::vector<std::string> out;
  for (VarId v : s.vars()) out.push_back(vars[v].name);
  return out;
}

/// Path check for one family of variable sets (scopes or internals).
void running_intersection_for(const SubsystemTree& tree, const std::vector<Scope>& sets,
                              const char* which, ValidationReport& report) {
  Scope all;
  for (const auto& s : sets) all = all.unite(s);
  for (VarId v : all.vars()) {
    std::vector<std::size_t> holders;
    for (std::size_t j = 0; j < sets.size(); ++j)
      if (sets[j].contains(v)) holders.push_back(j);
    std::set<std::size_t> reported;
    for (std::size_t a = 0; a < holders.size(); ++a) {
      for (std::size_t b = a + 1; b < holders.size(); ++b) {
        for (std::size_t l : tree.path(holders[a], holders[b])) {
          if (sets[l].contains(v) || !reported.insert(l).second) continue;
          Violation viol;
          viol.kind = ViolationKind::RunningIntersection;
          viol.subsystems = {tree.subsystem(holders[a]).name, tree.subsystem(holders[b]).name,
                             tree.subsystem(l).name};
          viol.variables = {tree.variables()[v].name};
          viol.detail = std::string(which) + " variable '" + tree.variables()[v].name +
                        "' is shared by '" + viol.subsystems[0] + "' and '" + viol.subsystems[1] +
                        "' but missing from '" + viol.subsystems[2] + "' on the path between them";
          report.violations.push_back(std::move(viol));
        }
      }
    }
  }
}

}  // namespace

ValidationReport check_running_intersection(const SubsystemTree& tree) {
  ValidationReport report;
  std::vector<Scope> scopes, internals;
  for (std::size_t j = 0; j < tree.size(); ++j) {
    scopes.push_back(tree.scope(j));
    internals.push_back(tree.subsystem(j).internal);
  }
  running_intersection_for(tree, scopes, "scope", report);
  running_intersection_for(tree, internals, "internal", report);
  return report;
}

ValidationReport check_normalization(const SubsystemTree& tree, double tolerance) {
  ValidationReport report;
  for (const auto& s : tree.subsystems()) {
    const std::size_t rows = s.scope_size(), cols = s.internal_size();
    double worst = 0.0;
    for (std::size_t z = 0; z < rows; ++z) {
      double sum = 0.0;
      for (std::size_t x = 0; x < cols; ++x) {
        const double p = s.probability(z, x);
        sum += p;
        if (p < 0.0) worst = std::max(worst, -p);
      }
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    if (worst > tolerance) {
      Violation v;
      v.kind = ViolationKind::Normalization;
      v.subsystems = {s.name};
      v.magnitude = worst;
      v.detail = "transition rows of '" + s.name + "' deviate from a probability distribution";
      report.violations.push_back(std::move(v));
    }
  }
  return report;
}

ValidationReport check_consistent_dynamics(const SubsystemTree& tree, double tolerance) {
  ValidationReport report;
  for (std::size_t k = 0; k < tree.size(); ++k) {
    const auto parent = tree.parent(k);
    if (!parent) continue;
    const std::size_t j = *parent;
    const auto& sj = tree.subsystem(j);
    const auto& sk = tree.subsystem(k);
    const Scope shared = sj.internal.intersect(sk.internal);
    if (shared.empty()) continue;
    const Scope joint = tree.scope(j).unite(tree.scope(k));
    const auto zj = projection(joint, tree.scope(j));
    const auto zk = projection(joint, tree.scope(k));
    const auto xj = projection(sj.internal, shared);
    const auto xk = projection(sk.internal, shared);
    const std::size_t nw = shared.assignment_count();
    double worst = 0.0;
    std::vector<double> mj(nw), mk(nw);
    for (std::size_t z = 0; z < joint.assignment_count(); ++z) {
      std::fill(mj.begin(), mj.end(), 0.0);
      std::fill(mk.begin(), mk.end(), 0.0);
      for (std::size_t x = 0; x < xj.size(); ++x) mj[xj[x]] += sj.probability(zj[z], x);
      for (std::size_t x = 0; x < xk.size(); ++x) mk[xk[x]] += sk.probability(zk[z], x);
      for (std::size_t w = 0; w < nw; ++w) worst = std::max(worst, std::abs(mj[w] - mk[w]));
    }
    if (worst > tolerance) {
      Violation v;
      v.kind = ViolationKind::Dynamics;
      v.subsystems = {sj.name, sk.name};
      v.variables = var_names(tree.variables(), shared);
      v.magnitude = worst;
      v.detail = "'" + sj.name + "' and '" + sk.name + "' disagree on the dynamics of shared internal variables";
      report.violations.push_back(std::move(v));
    }
  }
  return report;
}

ValidationReport check_relevance_weights(const SubsystemTree& tree, const RelevanceWeights& weights,
                                         double tolerance) {
  if (weights.size() != tree.size())
    throw InputError("relevance weights given for " + std::to_string(weights.size()) +
                     " subsystems, tree has " + std::to_string(tree.size()));
  ValidationReport report;
  for (std::size_t j = 0; j < tree.size(); ++j) {
    const auto& s = tree.subsystem(j);
    if (weights[j].size() != s.internal_size())
      throw InputError("relevance weights for '" + s.name + "' have " + std::to_string(weights[j].size()) +
                       " entries, expected " + std::to_string(s.internal_size()));
    double total = 0.0;
    bool bad = false;
    for (double w : weights[j]) {
      if (!std::isfinite(w) || w < 0.0) bad = true;
      total += w;
    }
    if (bad || total <= 0.0) {
      Violation v;
      v.kind = ViolationKind::Weights;
      v.subsystems = {s.name};
      v.detail = "relevance weights of '" + s.name + "' must be finite, nonnegative and not all zero";
      report.violations.push_back(std::move(v));
    }
  }
  for (std::size_t k = 0; k < tree.size(); ++k) {
    const auto parent = tree.parent(k);
    if (!parent) continue;
    const auto& sj = tree.subsystem(*parent);
    const auto& sk = tree.subsystem(k);
    const Scope shared = sj.internal.intersect(sk.internal);
    const auto pj = projection(sj.internal, shared);
    const auto pk = projection(sk.internal, shared);
    std::vector<double> mj(shared.assignment_count(), 0.0), mk(shared.assignment_count(), 0.0);
    for (std::size_t x = 0; x < pj.size(); ++x) mj[pj[x]] += weights[*parent][x];
    for (std::size_t x = 0; x < pk.size(); ++x) mk[pk[x]] += weights[k][x];
    double worst = 0.0;
    for (std::size_t w = 0; w < mj.size(); ++w) worst = std::max(worst, std::abs(mj[w] - mk[w]));
    if (worst > tolerance) {
      Violation v;
      v.kind = ViolationKind::Weights;
      v.subsystems = {sj.name, sk.name};
      v.variables = var_names(tree.variables(), shared);
      v.magnitude = worst;
      v.detail = shared.empty()
                     ? "relevance weights of '" + sj.name + "' and '" + sk.name + "' have different total mass"
                     : "relevance weight marginals of '" + sj.name + "' and '" + sk.name + "' disagree";
      report.violations.push_back(std::move(v));
    }
  }
  return report;
}

ValidationReport validate(const SubsystemTree& tree, const RelevanceWeights* weights,
                          const Tolerances& tol) {
  ValidationReport report = check_running_intersection(tree);
  report.append(check_normalization(tree, tol.probability));
  if (report.count(ViolationKind::RunningIntersection) == 0)
    report.append(check_consistent_dynamics(tree, tol.dynamics));
  if (weights) report.append(check_relevance_weights(tree, *weights, tol.weights));
  return report;
}

// ---------------------------------------------------------------------------
// Joint dynamics

namespace {

/// For each assignment of `outer`, the linear index contribution into
/// `inner` of the variables the two scopes share.
std::vector<std::size_t> partial_index(const Scope& outer, const Scope& inner) {
  std::vector<std::size_t> stride(outer.size(), 0);
  std::size_t s = 1;
  for (std::size_t i = inner.size(); i-- > 0;) {
    if (auto pos = outer.position(inner.var(i))) stride[*pos] = s;
    s *= inner.card(i);
  }
  std::vector<std::size_t> out;
  out.reserve(outer.assignment_count());
  for (AssignmentCursor c(outer); !c.done(); c.next()) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < outer.size(); ++i) idx += c.values()[i] * stride[i];
    out.push_back(idx);
  }
  return out;
}

}  // namespace

JointDynamics::JointDynamics(const SubsystemTree& tree)
    : tree_(&tree),
      states_(tree.internal_vars()),
      actions_(tree.external_vars()),
      n_states_(states_.assignment_count()),
      n_actions_(actions_.assignment_count()) {
  const std::size_t m = tree.size();
  state_stride_.resize(m);
  action_stride_.resize(m);
  internal_stride_.resize(m);
  shared_internal_.resize(m);
  shared_proj_.resize(m);
  shared_state_stride_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    state_stride_[j] = partial_index(states_, tree.scope(j));
    action_stride_[j] = partial_index(actions_, tree.scope(j));
    internal_stride_[j] = partial_index(states_, tree.subsystem(j).internal);
    if (auto p = tree.parent(j)) {
      shared_internal_[j] = tree.subsystem(j).internal.intersect(tree.subsystem(*p).internal);
      shared_proj_[j] = projection(tree.subsystem(j).internal, shared_internal_[j]);
      shared_state_stride_[j] = partial_index(states_, shared_internal_[j]);
    }
  }
}

std::size_t JointDynamics::local_index(std::size_t j, std::size_t state, std::size_t action) const {
  return state_stride_[j][state] + action_stride_[j][action];
}

std::size_t JointDynamics::internal_index(std::size_t j, std::size_t state) const {
  return internal_stride_[j][state];
}

double JointDynamics::reward(std::size_t state, std::size_t action) const {
  double r = 0.0;
  for (std::size_t j = 0; j < tree_->size(); ++j) r += tree_->subsystem(j).reward[local_index(j, state, action)];
  return r;
}

std::vector<double> JointDynamics::transition_row(std::size_t state, std::size_t action) const {
  const std::size_t m = tree_->size();
  std::vector<double> row(n_states_, 1.0);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& s = tree_->subsystem(j);
    const std::size_t z = local_index(j, state, action);
    for (std::size_t next = 0; next < n_states_; ++next) row[next] *= s.probability(z, internal_stride_[j][next]);
    if (shared_internal_[j].empty()) continue;
    // Divide out the doubly counted marginal of the shared internal variables.
    std::vector<double> marginal(shared_internal_[j].assignment_count(), 0.0);
    for (std::size_t x = 0; x < shared_proj_[j].size(); ++x) marginal[shared_proj_[j][x]] += s.probability(z, x);
    for (std::size_t w = 0; w < marginal.size(); ++w) {
      if (marginal[w] == 0.0) {
        std::ostringstream os;
        os << "zero separator marginal for subsystem '" << s.name << "' at shared assignment (";
        const auto a = assignment_at(shared_internal_[j], w);
        for (std::size_t i = 0; i < a.values.size(); ++i) {
          const auto& decl = tree_->variables()[a.scope.var(i)];
          os << (i ? ", " : "") << decl.name << '=' << decl.domain[a.values[i]];
        }
        os << ')';
        throw DegenerateModelError(os.str());
      }
    }
    for (std::size_t next = 0; next < n_states_; ++next) row[next] /= marginal[shared_state_stride_[j][next]];
  }
  return row;
}

EquivalentMdp build_equivalent_mdp(const SubsystemTree& tree, std::size_t cap, double tolerance) {
  JointDynamics dyn(tree);
  const std::size_t ns = dyn.state_count(), na = dyn.action_count();
  if (ns * na > cap)
    throw OracleCapError("equivalent MDP has " + std::to_string(ns * na) +
                         " state-action pairs, above the cap of " + std::to_string(cap));
  if (ns * na * ns > (std::size_t{1} << 27))
    throw OracleCapError("equivalent MDP transition table would hold " + std::to_string(ns * na * ns) +
                         " entries");
  EquivalentMdp mdp;
  mdp.state_scope = dyn.state_scope();
  mdp.action_scope = dyn.action_scope();
  mdp.states = ns;
  mdp.actions = na;
  mdp.discount = tree.discount();
  mdp.reward.resize(ns * na);
  mdp.transition.resize(ns * na * ns);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      mdp.reward[s * na + a] = dyn.reward(s, a);
      const auto row = dyn.transition_row(s, a);
      double sum = 0.0;
      for (double p : row) sum += p;
      if (std::abs(sum - 1.0) > tolerance)
        throw InputError("equivalent MDP transition row (state " + std::to_string(s) + ", action " +
                         std::to_string(a) + ") sums to " + std::to_string(sum) +
                         "; is the tree consistent?");
      std::copy(row.begin(), row.end(), mdp.transition.begin() + static_cast<std::ptrdiff_t>((s * na + a) * ns));
    }
  }
  return mdp;
}

std::vector<double> global_relevance_weights(const SubsystemTree& tree, const RelevanceWeights& weights,
                                             std::size_t cap) {
  if (weights.size() != tree.size()) throw InputError("relevance weights do not match the tree");
  const Scope states = tree.internal_vars();
  const std::size_t ns = states.assignment_count();
  if (ns > cap) throw OracleCapError("joint state space above the oracle cap");
  std::vector<double> alpha(ns, 1.0);
  for (std::size_t j = 0; j < tree.size(); ++j) {
    const auto& s = tree.subsystem(j);
    if (weights[j].size() != s.internal_size()) throw InputError("relevance weights have the wrong length");
    const auto idx = partial_index(states, s.internal);
    for (std::size_t x = 0; x < ns; ++x) alpha[x] *= weights[j][idx[x]];
    if (auto p = tree.parent(j)) {
      const Scope shared = s.internal.intersect(tree.subsystem(*p).internal);
      const auto proj = projection(s.internal, shared);
      std::vector<double> mu(shared.assignment_count(), 0.0);
      for (std::size_t x = 0; x < proj.size(); ++x) mu[proj[x]] += weights[j][x];
      const auto sidx = partial_index(states, shared);
      for (std::size_t x = 0; x < ns; ++x) alpha[x] = mu[sidx[x]] == 0.0 ? 0.0 : alpha[x] / mu[sidx[x]];
    }
  }
  // The construction only reproduces every ᾱ_j when the weights factor.
  for (std::size_t j = 0; j < tree.size(); ++j) {
    const auto& s = tree.subsystem(j);
    const auto idx = partial_index(states, s.internal);
    std::vector<double> marg(s.internal_size(), 0.0);
    for (std::size_t x = 0; x < ns; ++x) marg[idx[x]] += alpha[x];
    for (std::size_t x = 0; x < marg.size(); ++x) {
      if (std::abs(marg[x] - weights[j][x]) > 1e-9 * std::max(1.0, std::abs(weights[j][x])))
        throw InputError("relevance weights of '" + s.name + "' do not factor along subsystem lines");
    }
  }
  return alpha;
}

}  // namespace hfmdp
