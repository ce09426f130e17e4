#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hfmdp/lp.hpp"
#include "hfmdp/model.hpp"
#include "hfmdp/validation.hpp"

namespace hfmdp {

struct ExactSolution {
  /// V* over joint states (EquivalentMdp state order).
  std::vector<double> value;
  /// Optimal flows φ*[s·A + a], filled by exact_dual_flows only.
  std::vector<double> flows;
  /// Greedy action per state; ties go to the lowest action index.
  std::vector<std::size_t> policy;
  double objective = 0.0;
};

/// Minimise α·V subject to V ≥ R_a + γ P_a V. Solved in the primal form
/// when the dense tableau is small enough, otherwise through the flow form
/// with V read from its duals.
ExactSolution exact_bellman_lp(const EquivalentMdp& mdp, const std::vector<double>& alpha,
                               const SimplexOptions& options = {});

/// Maximise Σ R·φ subject to Σ_a φ_a − γ Σ_a P_aᵀ φ_a = α, φ ≥ 0. `value`
/// holds the conservation-row duals (which are V*).
ExactSolution exact_dual_flows(const EquivalentMdp& mdp, const std::vector<double>& alpha,
                               const SimplexOptions& options = {});

/// Greedy policy of `value` with lowest-index tie-break (within 1e-12
/// relative).
std::vector<std::size_t> greedy_policy(const EquivalentMdp& mdp, const std::vector<double>& value);

/// Exact value of a stationary deterministic policy by a linear solve.
std::vector<double> evaluate_policy(const EquivalentMdp& mdp, const std::vector<std::size_t>& policy);

struct CentralizedFactoredSolution {
  std::vector<std::vector<double>> values;
  /// S_k per subsystem over its separator; the root's is empty.
  std::vector<std::vector<double>> messages;
  /// U_j = Σ_children S_k − S_j over Scope[M_j].
  std::vector<std::vector<double>> adjustments;
  double objective = 0.0;
  /// The monolithic LP as solved (columns: every V_j, then every S_k).
  LinearProgram lp;
};

/// The factored LP with message variables, solved in one piece. S entries
/// are boxed to ±message_bound (default: the planner's default bound).
CentralizedFactoredSolution centralized_factored_lp(const SubsystemTree& tree, const RelevanceWeights& weights,
                                                    double message_bound = 0.0, const SimplexOptions& options = {});

struct FeasibilityReport {
  double max_violation = 0.0;
  std::size_t constraints_checked = 0;
  bool sampled = false;
};

inline constexpr std::size_t kFeasibilityEnumerationCap = std::size_t{1} << 16;

/// Largest violation of Σ_j V_j(x_j) ≥ R(x,a) + γ E[Σ_j V_j(x′_j)] over joint
/// (x, a). Enumerates with the joint transition up to the enumeration cap,
/// beyond it samples `sample_budget` pairs using the subsystem marginals.
FeasibilityReport check_global_feasibility(const SubsystemTree& tree, const std::vector<std::vector<double>>& values,
                                           std::size_t sample_budget = 4096, std::uint64_t seed = 0);

}  // namespace hfmdp
