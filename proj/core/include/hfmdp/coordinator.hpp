#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hfmdp/errors.hpp"
#include "hfmdp/local_planner.hpp"
#include "hfmdp/lp.hpp"
#include "hfmdp/model.hpp"

namespace hfmdp {

class ReuseCache;

/// New subtree policies reported by a child to its parent: marginals on the
/// shared separator and the matching subtree values.
struct FlowMessage {
  std::size_t sender = 0;
  std::vector<double> values;
  std::vector<std::vector<double>> frequencies;
};

// ---------------------------------------------------------------------------
// Reward-message LP

struct MessageLpInput {
  const LocalPolicyBank* local = nullptr;
  /// One bank per child, in children order.
  std::vector<const SubtreePolicyBank*> children;
  /// Ŝ_j from the parent; empty separator at the root.
  const RewardMessage* own = nullptr;
  double message_bound = 0.0;
};

/// Column layout: θ_j, then θ_k per child, then each child's S_k entries.
/// Row layout: one row per local policy, then per child one row per subtree
/// policy. Local rows read θ_j − Σ_k Φ_jk S_k ≥ L_j − Φ_jj Ŝ_j; child rows
/// read θ_k + Φ_k S_k ≥ T_k. S entries are boxed to ±message_bound unless
/// `boxed` is false.
LinearProgram build_message_lp(const MessageLpInput& input, bool boxed = true);

struct MessageLpSolution {
  /// Optimal unless the unboxed probe was unbounded; then Unbounded, with
  /// everything below taken from the boxed solve.
  LpStatus probe_status = LpStatus::Optimal;
  std::vector<RewardMessage> child_messages;
  double objective = 0.0;
  /// Mixture over local policies, then one mixture per child.
  std::vector<double> local_weights;
  std::vector<std::vector<double>> child_weights;
  /// When the unboxed LP is unbounded: (child position, separator index) of
  /// S entries held at the box with a nonzero reduced cost.
  std::vector<std::pair<std::size_t, std::size_t>> active_bounds;
  std::size_t iterations = 0;

  bool bounded() const noexcept { return probe_status == LpStatus::Optimal; }
};

/// Solves the message LP without the box first and with it when the result
/// is unbounded or lands outside the box. Mixture weights are the θ-row
/// duals of the unboxed LP whenever it is bounded, since only those satisfy
/// flow matching between the blocks. Each child message is shifted by a
/// constant so its entries are centred on zero; the shift is free because
/// every policy row of one subtree carries the same total flow mass.
/// Throws SolverError when the LP is infeasible.
MessageLpSolution solve_message_lp(const MessageLpInput& input, const std::vector<Scope>& child_separators,
                                   const SimplexOptions& options = {});

/// Value and separator marginal of the mixed subtree policy.
SubtreeRow subtree_statistics(const MessageLpSolution& solution, const MessageLpInput& input);

// ---------------------------------------------------------------------------
// Scheduling

enum class ScheduleKind { Sync, LeavesFirst, Random };

const char* to_string(ScheduleKind k) noexcept;
/// Accepts "sync", "leaves-first", "random"; throws InputError otherwise.
ScheduleKind parse_schedule(std::string_view name);

/// Agent order per round. Sync runs every message step, then every planning
/// step, with delivery only between stages; the other kinds run each agent's
/// message and planning steps back to back with immediate delivery.
class Schedule {
 public:
  Schedule(ScheduleKind kind, const SubsystemTree& tree, std::uint64_t seed);

  ScheduleKind kind() const noexcept { return kind_; }
  std::vector<std::size_t> next_round();

 private:
  ScheduleKind kind_;
  std::vector<std::size_t> base_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Planner

struct TraceEvent {
  std::size_t round = 0;
  std::size_t agent = 0;
  /// "standalone", "message-lp", "reward-message", "flow-message",
  /// "shared-flows", "shared-subtree-rows" or "escalate".
  std::string event;
  std::string status;
  double message_norm = 0.0;
  double objective = 0.0;
  std::size_t local_rows = 0;
  std::size_t subtree_rows = 0;
  bool cache_hit = false;
};

struct SolveCounters {
  std::size_t standalone_solves = 0;
  std::size_t message_lp_solves = 0;
  std::size_t memo_hits = 0;
  std::size_t shared_flow_rows = 0;
  std::size_t shared_subtree_rows = 0;
  std::size_t reward_messages = 0;
  std::size_t flow_messages = 0;
};

struct PlannerConfig {
  ScheduleKind schedule = ScheduleKind::Sync;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 1000;
  double convergence_tolerance = 1e-7;
  double duplicate_tolerance = kDefaultDuplicateTolerance;
  /// Box on message entries; default 10·Σ_j max|R_j| / (1−γ).
  std::optional<double> message_bound;
  std::size_t max_bound_doublings = 6;
  /// Shared between runs when set; reuse is off when null.
  ReuseCache* cache = nullptr;
  SimplexOptions lp;
  /// Optional sink for trace events as they happen.
  std::function<void(const TraceEvent&)> on_event;
  /// Optional observer of every stand-alone solution an agent records, memo
  /// hits included. Used by property suites to audit the flows.
  std::function<void(std::size_t agent, const FlowSolution&)> on_policy;
};

struct PlanResult {
  bool converged = false;
  std::string failure;
  /// V_j over Internal[M_j] from the last stand-alone solve.
  std::vector<std::vector<double>> values;
  /// Ŝ_j per subsystem (the root's is the empty message).
  std::vector<RewardMessage> messages;
  std::size_t rounds = 0;
  double objective = 0.0;
  double message_bound = 0.0;
  std::size_t bound_doublings = 0;
  /// Root message-LP objective per solve, with the bound in force.
  std::vector<std::pair<double, double>> root_objectives;
  std::vector<std::size_t> local_bank_rows;
  std::vector<TraceEvent> trace;
  SolveCounters counters;
};

/// Thrown when the round cap is hit or box bounds stay active; carries the
/// partial result and its trace.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, std::shared_ptr<const PlanResult> partial)
      : Error(what), partial_(std::move(partial)) {}
  const PlanResult& partial() const noexcept { return *partial_; }

 private:
  std::shared_ptr<const PlanResult> partial_;
};

double default_message_bound(const SubsystemTree& tree);

/// Distributed planning loop. Requires a consistent tree and relevance
/// weights that pass check_relevance_weights (InputError otherwise).
PlanResult run_planner(const SubsystemTree& tree, const RelevanceWeights& weights, const PlannerConfig& config = {});

}  // namespace hfmdp
