#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hfmdp/lp.hpp"
#include "hfmdp/model.hpp"

namespace hfmdp {

/// Reward transfer across one tree edge: one real per separator assignment.
/// The root's message has the empty separator and a single zero entry.
struct RewardMessage {
  Scope separator;
  std::vector<double> values;

  static RewardMessage zero(const Scope& separator);
  double max_abs_difference(const RewardMessage& other) const;
  friend bool operator==(const RewardMessage&, const RewardMessage&) = default;
};

/// R_j + Σ_children Ŝ_k − Ŝ_j over Scope[M_j], each message looked up by
/// restricting the scope assignment to its separator. `child_messages`
/// follows tree.children(j).
std::vector<double> adjusted_reward(const SubsystemTree& tree, std::size_t j, const RewardMessage& own,
                                    std::span<const RewardMessage> child_messages);

/// Optimal occupancy flow of one stand-alone MDP.
struct FlowSolution {
  /// φ(x_j, a_j), one entry per assignment of Scope[M_j].
  std::vector<double> flow;
  /// V_j over Internal[M_j], read off the conservation-row duals.
  std::vector<double> value;
  /// Σ (adjusted reward)·φ, which equals ᾱ_j·V_j at optimality.
  double adjusted_objective = 0.0;
  std::size_t iterations = 0;
};

/// Solves the flow form of the stand-alone MDP: maximise reward·φ subject to
/// Σ_a φ(x′,a) − γ Σ_z P(x′|z) φ(z) = ᾱ(x′), φ ≥ 0. SolverError messages
/// carry the subsystem name.
FlowSolution solve_standalone(const BasicSubsystem& subsystem, double discount,
                              std::span<const double> reward, std::span<const double> weights,
                              const SimplexOptions& options = {});

/// Σ R_j·φ with the original reward table.
double local_value_entry(const FlowSolution& flow, std::span<const double> reward);

/// Marginal of φ onto `sep` (which must lie inside the subsystem's scope).
std::vector<double> marginalize_flow(std::span<const double> flow, const Scope& scope, const Scope& sep);

/// max_x′ |Σ_a φ(x′,a) − γ Σ_z P(x′|z)φ(z) − ᾱ(x′)|.
double conservation_residual(const BasicSubsystem& subsystem, double discount, std::span<const double> flow,
                             std::span<const double> weights);

inline constexpr double kDefaultDuplicateTolerance = 1e-9;

/// Statistics of the deterministic policies one subsystem has found: local
/// value and the flow marginal onto each separator touching it. Separator 0
/// is the subsystem's own (towards its parent); separators 1.. follow the
/// children order.
class LocalPolicyBank {
 public:
  LocalPolicyBank() = default;
  explicit LocalPolicyBank(std::vector<Scope> separators);

  const std::vector<Scope>& separators() const noexcept { return separators_; }
  std::size_t rows() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double value(std::size_t row) const { return values_.at(row); }
  const std::vector<double>& values() const noexcept { return values_; }
  /// Marginal of policy `row` on separator `sep`.
  const std::vector<double>& marginal(std::size_t row, std::size_t sep) const { return marginals_.at(row).at(sep); }

  /// Appends a row unless one within tolerance (scaled by max(1,|entry|))
  /// already exists. Returns whether the bank changed.
  bool record(double value, std::vector<std::vector<double>> marginals,
              double tolerance = kDefaultDuplicateTolerance);

 private:
  std::vector<Scope> separators_;
  std::vector<double> values_;
  std::vector<std::vector<std::vector<double>>> marginals_;
};

/// Records a flow: L from the original reward, one marginal per separator.
bool record_policy(LocalPolicyBank& bank, const FlowSolution& flow, const Scope& scope,
                   std::span<const double> reward, double tolerance = kDefaultDuplicateTolerance);

/// One (mixed) subtree policy: its subtree value and separator marginal.
struct SubtreeRow {
  double value = 0.0;
  std::vector<double> frequencies;
};

/// Subtree values and separator marginals of mixed policies for a subtree.
class SubtreePolicyBank {
 public:
  SubtreePolicyBank() = default;
  explicit SubtreePolicyBank(Scope separator) : separator_(std::move(separator)) {}

  const Scope& separator() const noexcept { return separator_; }
  std::size_t rows() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double value(std::size_t row) const { return values_.at(row); }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& frequencies(std::size_t row) const { return rows_.at(row); }

  bool record(double value, std::vector<double> frequencies, double tolerance = kDefaultDuplicateTolerance);

 private:
  Scope separator_;
  std::vector<double> values_;
  std::vector<std::vector<double>> rows_;
};

}  // namespace hfmdp
