#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hfmdp/model.hpp"
#include "hfmdp/validation.hpp"

namespace hfmdp {

/// Q_j over Scope[M_j] per subsystem.
using LocalQ = std::vector<std::vector<double>>;

/// Q_j(z) = R_j(z) + γ Σ_x′ P_j(x′|z) V_j(x′) with the original rewards.
LocalQ compute_q(const SubsystemTree& tree, const std::vector<std::vector<double>>& values);

struct SelectionStats {
  /// Table entries visited by the upward pass.
  std::size_t max_operations = 0;
  /// Per subsystem, the state variables it read.
  std::vector<Scope> observed;
};

/// Two-pass hierarchical argmax of Σ_j Q_j given the state. Each
/// subsystem only sees the state restricted to its own scope. Ties are
/// broken towards the lowest local action index, so the result is a
/// deterministic function of (tree, Q, state). Throws InputError when
/// `state` does not assign every tree-internal variable.
Assignment select_action(const SubsystemTree& tree, const LocalQ& q, const Assignment& state,
                         SelectionStats* stats = nullptr);

/// Σ_j Q_j at (state, action).
double joint_q(const SubsystemTree& tree, const LocalQ& q, const Assignment& state, const Assignment& action);

/// Exhaustive maximisation over External[M], for checking select_action.
/// Returns the lexicographically smallest maximiser.
Assignment brute_force_action(const SubsystemTree& tree, const LocalQ& q, const Assignment& state);

struct Episode {
  /// states[t] is the state in which actions[t] was taken; the extra last
  /// entry is where the episode ends.
  std::vector<Assignment> states;
  std::vector<Assignment> actions;
  std::vector<double> rewards;
  double discounted_return = 0.0;
};

/// Greedy execution for `horizon` steps, sampling next states from the joint
/// transition. Refuses (OracleCapError) when states·actions exceeds `cap`.
Episode simulate_episode(const SubsystemTree& tree, const LocalQ& q, const Assignment& start, std::size_t horizon,
                         std::uint64_t seed, std::size_t cap = kDefaultOracleCap);

/// Greedy action index for every joint state, under the same cap.
std::vector<std::size_t> policy_table(const SubsystemTree& tree, const LocalQ& q,
                                      std::size_t cap = kDefaultOracleCap);

}  // namespace hfmdp
