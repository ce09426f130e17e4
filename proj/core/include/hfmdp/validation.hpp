#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hfmdp/model.hpp"

namespace hfmdp {

enum class ViolationKind { RunningIntersection, Dynamics, Normalization, Weights };

const char* to_string(ViolationKind k) noexcept;

struct Violation {
  ViolationKind kind;
  std::vector<std::string> subsystems;
  std::vector<std::string> variables;
  /// Size of the numeric discrepancy; 0 for structural violations.
  double magnitude = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool clean() const noexcept { return violations.empty(); }
  void append(const ValidationReport& other);
  std::size_t count(ViolationKind k) const;
};

struct Tolerances {
  double probability = 1e-9;
  double dynamics = 1e-9;
  double weights = 1e-9;
};

/// Every variable shared by two subsystems (scope-wise, and separately
/// internal-wise) must appear on every subsystem along the path between them.
ValidationReport check_running_intersection(const SubsystemTree& tree);

/// Transition rows must be nonnegative and sum to one.
ValidationReport check_normalization(const SubsystemTree& tree, double tolerance = 1e-9);

/// Neighbouring subsystems must agree on the next-step marginal of their
/// shared internal variables, for every assignment to their joint scope.
/// One violation per offending edge, carrying the largest discrepancy.
ValidationReport check_consistent_dynamics(const SubsystemTree& tree, double tolerance = 1e-9);

/// Marginals of neighbouring weight vectors onto shared internal variables
/// (total mass when nothing is shared) must agree. Throws InputError when a
/// weight vector is missing or has the wrong length.
ValidationReport check_relevance_weights(const SubsystemTree& tree, const RelevanceWeights& weights,
                                         double tolerance = 1e-9);

/// All checks; dynamics only when running intersection holds.
ValidationReport validate(const SubsystemTree& tree, const RelevanceWeights* weights = nullptr,
                          const Tolerances& tol = {});

/// Flat MDP defined by a consistent subsystem tree. States enumerate
/// Internal[M], actions enumerate External[M], both in canonical order.
struct EquivalentMdp {
  Scope state_scope;
  Scope action_scope;
  std::size_t states = 0;
  std::size_t actions = 0;
  double discount = 0.0;
  /// reward[s * actions + a]
  std::vector<double> reward;
  /// transition[(s * actions + a) * states + s']
  std::vector<double> transition;

  double r(std::size_t s, std::size_t a) const { return reward[s * actions + a]; }
  double p(std::size_t s, std::size_t a, std::size_t next) const {
    return transition[(s * actions + a) * states + next];
  }
};

inline constexpr std::size_t kDefaultOracleCap = std::size_t{1} << 20;

/// Precomputed index maps for evaluating the product-form joint transition.
class JointDynamics {
 public:
  explicit JointDynamics(const SubsystemTree& tree);

  const Scope& state_scope() const noexcept { return states_; }
  const Scope& action_scope() const noexcept { return actions_; }
  std::size_t state_count() const noexcept { return n_states_; }
  std::size_t action_count() const noexcept { return n_actions_; }

  /// Index into Scope[M_j] of the joint (state, action) pair.
  std::size_t local_index(std::size_t j, std::size_t state, std::size_t action) const;
  /// Index into Internal[M_j] of a joint state.
  std::size_t internal_index(std::size_t j, std::size_t state) const;
  double reward(std::size_t state, std::size_t action) const;
  /// P(· | state, action) over all joint next states. Throws
  /// DegenerateModelError when a separator marginal in the denominator is 0.
  std::vector<double> transition_row(std::size_t state, std::size_t action) const;

 private:
  const SubsystemTree* tree_;
  Scope states_;
  Scope actions_;
  std::size_t n_states_;
  std::size_t n_actions_;
  // Per subsystem j: stride of each joint state/action variable in Scope[M_j].
  std::vector<std::vector<std::size_t>> state_stride_;
  std::vector<std::vector<std::size_t>> action_stride_;
  std::vector<std::vector<std::size_t>> internal_stride_;
  // Per non-root k: Internal[M_k] ∩ Internal[Parent] and the map from
  // Internal[M_k] indices onto it.
  std::vector<Scope> shared_internal_;
  std::vector<std::vector<std::size_t>> shared_proj_;
  std::vector<std::vector<std::size_t>> shared_state_stride_;
};

/// Exhaustive flat MDP. Refuses (OracleCapError) when states·actions exceeds
/// `cap`. Transition rows are checked against the normalisation tolerance,
/// never renormalised.
EquivalentMdp build_equivalent_mdp(const SubsystemTree& tree, std::size_t cap = kDefaultOracleCap,
                                   double tolerance = 1e-9);

/// Global relevance weights α over Internal[M] whose per-subsystem marginals
/// are the given ᾱ_j (product over subsystems divided by the shared-internal
/// marginals). Throws InputError when the weights do not factor.
std::vector<double> global_relevance_weights(const SubsystemTree& tree,
                                             const RelevanceWeights& weights,
                                             std::size_t cap = kDefaultOracleCap);

}  // namespace hfmdp
