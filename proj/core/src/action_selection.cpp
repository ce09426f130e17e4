#include "hfmdp/action_selection.hpp"

#include <limits>
#include <random>

#include "hfmdp/errors.hpp"

namespace hfmdp {

namespace {
constexpr double kInfinity = std::numeric_limits<double>::infinity();
}  // namespace

LocalQ compute_q(const SubsystemTree& tree, const std::vector<std::vector<double>>& values) {
  if (values.size() != tree.size()) throw InputError("one value table per subsystem is required");
  LocalQ q(tree.size());
  const double g = tree.discount();
  for (std::size_t j = 0; j < tree.size(); ++j) {
    const auto& s = tree.subsystem(j);
    const std::size_t nx = s.internal_size();
    if (values[j].size() != nx) throw InputError("value table of '" + s.name + "' has the wrong length");
    q[j].resize(s.reward.size());
    for (std::size_t z = 0; z < q[j].size(); ++z) {
      double future = 0.0;
      for (std::size_t x = 0; x < nx; ++x) future += s.probability(z, x) * values[j][x];
      q[j][z] = s.reward[z] + g * future;
    }
  }
  return q;
}

namespace {

/// Fills the values of `sub` from `full`, where both are assignments and
/// every variable of `sub`'s scope is in `full`'s.
std::vector<std::uint32_t> pick(const Assignment& full, const Scope& sub) {
  std::vector<std::uint32_t> v(sub.size());
  for (std::size_t i = 0; i < sub.size(); ++i) v[i] = full.value_of(sub.var(i));
  return v;
}

/// Index into `scope` of an assignment whose values come from two disjoint
/// sources covering it.
std::size_t combined_index(const Scope& scope, const Scope& a, const std::vector<std::uint32_t>& va, const Scope& b,
                           const std::vector<std::uint32_t>& vb) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < scope.size(); ++i) {
    const VarId v = scope.var(i);
    std::uint32_t val;
    if (auto p = a.position(v)) val = va[*p];
    else val = vb[*b.position(v)];
    idx = idx * scope.card(i) + val;
  }
  return idx;
}

}  // namespace

Assignment select_action(const SubsystemTree& tree, const LocalQ& q, const Assignment& state,
                         SelectionStats* stats) {
  const Scope& internal = tree.internal_vars();
  const Scope& external = tree.external_vars();
  for (VarId v : internal.vars())
    if (!state.scope.contains(v))
      throw InputError("state does not assign tree-internal variable '" + tree.variables()[v].name + "'");

  const std::size_t m = tree.size();
  std::vector<Scope> obs(m), act(m), up(m);
  std::vector<std::vector<std::uint32_t>> seen(m);
  for (std::size_t j = 0; j < m; ++j) {
    obs[j] = tree.scope(j).intersect(internal);
    act[j] = tree.scope(j).intersect(external);
    // Each subsystem gets only its own slice of the state.
    seen[j] = pick(state, obs[j]);
    if (auto p = tree.parent(j)) up[j] = act[j].intersect(tree.scope(*p).intersect(external));
  }
  if (stats) {
    stats->max_operations = 0;
    stats->observed = obs;
  }

  // Upward pass: table over b_j, collapsed onto the actions shared with the
  // parent; remember the maximiser per shared assignment.
  std::vector<std::vector<double>> msg(m);
  std::vector<std::vector<std::size_t>> best(m);
  std::vector<std::vector<std::size_t>> to_up(m);
  for (std::size_t j : tree.postorder()) {
    const std::size_t nb = act[j].assignment_count();
    std::vector<double> table(nb);
    std::vector<std::vector<std::size_t>> child_proj;
    for (std::size_t k : tree.children(j)) child_proj.push_back(projection(act[j], up[k]));
    std::size_t b = 0;
    for (AssignmentCursor c(act[j]); !c.done(); c.next(), ++b) {
      double v = q[j][combined_index(tree.scope(j), obs[j], seen[j], act[j], c.values())];
      const auto& kids = tree.children(j);
      for (std::size_t i = 0; i < kids.size(); ++i) v += msg[kids[i]][child_proj[i][b]];
      table[b] = v;
    }
    to_up[j] = projection(act[j], up[j]);
    msg[j].assign(up[j].assignment_count(), -kInfinity);
    best[j].assign(up[j].assignment_count(), 0);
    for (b = 0; b < nb; ++b) {
      const std::size_t u = to_up[j][b];
      if (table[b] > msg[j][u]) {
        msg[j][u] = table[b];
        best[j][u] = b;
      }
    }
    if (stats) stats->max_operations += nb;
  }

  // Downward pass: fix each subsystem's actions given its parent's choice.
  std::vector<std::size_t> chosen(m, 0);
  std::vector<std::uint32_t> action_values(external.size(), 0);
  for (std::size_t j : tree.preorder()) {
    std::size_t u = 0;
    if (auto p = tree.parent(j)) {
      const Assignment parent_choice = assignment_at(act[*p], chosen[*p]);
      u = assignment_index(restrict(parent_choice, up[j]));
    }
    chosen[j] = best[j][u];
    const Assignment mine = assignment_at(act[j], chosen[j]);
    for (std::size_t i = 0; i < act[j].size(); ++i) action_values[*external.position(act[j].var(i))] = mine.values[i];
  }
  return Assignment{external, std::move(action_values)};
}

double joint_q(const SubsystemTree& tree, const LocalQ& q, const Assignment& state, const Assignment& action) {
  double total = 0.0;
  for (std::size_t j = 0; j < tree.size(); ++j) {
    const Scope& scope = tree.scope(j);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < scope.size(); ++i) {
      const VarId v = scope.var(i);
      const std::uint32_t val = state.scope.contains(v) ? state.value_of(v) : action.value_of(v);
      idx = idx * scope.card(i) + val;
    }
    total += q[j][idx];
  }
  return total;
}

Assignment brute_force_action(const SubsystemTree& tree, const LocalQ& q, const Assignment& state) {
  const Scope& external = tree.external_vars();
  Assignment best{external, std::vector<std::uint32_t>(external.size(), 0)};
  double best_value = -kInfinity;
  for (AssignmentCursor c(external); !c.done(); c.next()) {
    Assignment a{external, c.values()};
    const double v = joint_q(tree, q, state, a);
    if (v > best_value) {
      best_value = v;
      best = std::move(a);
    }
  }
  return best;
}

Episode simulate_episode(const SubsystemTree& tree, const LocalQ& q, const Assignment& start, std::size_t horizon,
                         std::uint64_t seed, std::size_t cap) {
  if (horizon < 1) throw InputError("horizon must be at least 1");
  JointDynamics dyn(tree);
  if (dyn.state_count() * dyn.action_count() > cap)
    throw OracleCapError("episode simulation needs the joint transition; " +
                         std::to_string(dyn.state_count() * dyn.action_count()) +
                         " state-action pairs exceed the cap of " + std::to_string(cap));
  std::mt19937_64 rng(seed);
  Episode ep;
  std::size_t s = assignment_index(restrict(start, dyn.state_scope()));
  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const Assignment state = assignment_at(dyn.state_scope(), s);
    const Assignment action = select_action(tree, q, state);
    const std::size_t a = assignment_index(action);
    const double r = dyn.reward(s, a);
    ep.states.push_back(state);
    ep.actions.push_back(action);
    ep.rewards.push_back(r);
    ep.discounted_return += discount * r;
    discount *= tree.discount();
    // 53 random bits give a uniform double in [0, 1).
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const auto row = dyn.transition_row(s, a);
    double acc = 0.0;
    std::size_t next = row.size() - 1;
    for (std::size_t i = 0; i < row.size(); ++i) {
      acc += row[i];
      if (u < acc) {
        next = i;
        break;
      }
    }
    s = next;
  }
  ep.states.push_back(assignment_at(dyn.state_scope(), s));
  return ep;
}

std::vector<std::size_t> policy_table(const SubsystemTree& tree, const LocalQ& q, std::size_t cap) {
  const Scope& states = tree.internal_vars();
  const std::size_t n = states.assignment_count();
  if (n * tree.external_vars().assignment_count() > cap)
    throw OracleCapError("policy table would exceed the oracle cap");
  std::vector<std::size_t> out(n);
  for (std::size_t s = 0; s < n; ++s) out[s] = assignment_index(select_action(tree, q, assignment_at(states, s)));
  return out;
}

}  // namespace hfmdp
