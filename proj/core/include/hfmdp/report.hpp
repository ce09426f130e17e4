#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hfmdp/action_selection.hpp"
#include "hfmdp/coordinator.hpp"
#include "hfmdp/model.hpp"
#include "hfmdp/validation.hpp"

namespace hfmdp {

/// Bumped on any incompatible change to schema/report.schema.json.
inline constexpr int kReportSchemaVersion = 1;

/// Everything a command needs besides the model. Defaults match the
/// command-line defaults.
struct RunConfig {
  ScheduleKind schedule = ScheduleKind::Sync;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 1000;
  double convergence_tolerance = 1e-7;
  double feasibility_tolerance = 1e-7;
  double duplicate_tolerance = kDefaultDuplicateTolerance;
  std::optional<double> message_bound;
  bool reuse = true;
  std::size_t oracle_cap = kDefaultOracleCap;
  std::size_t horizon = 20;
  std::size_t episodes = 1;
  /// Wall-clock timings make reports run-dependent, so they are opt-in.
  bool timing = false;

  /// Throws InputError unless every tolerance is positive and caps are at
  /// least one.
  void check() const;
  PlannerConfig planner_config(ReuseCache* cache) const;
};

nlohmann::json config_json(const RunConfig& config);
nlohmann::json model_json(const SubsystemTree& tree, const RelevanceWeights& weights);
nlohmann::json validation_json(const ValidationReport& report);
nlohmann::json trace_event_json(const TraceEvent& event);
/// Values, messages, counters, trace and the root objective sequence.
nlohmann::json plan_json(const SubsystemTree& tree, const PlanResult& result);
nlohmann::json episode_json(const SubsystemTree& tree, const Episode& episode);

/// Distributed plan against the centralized factored LP and, when the flat
/// MDP fits under `oracle_cap`, the exact Bellman LP.
struct Comparison {
  double distributed_objective = 0.0;
  double centralized_objective = 0.0;
  std::optional<double> exact_objective;
  /// Σ_j V_j(x_j) per joint state, and V* when available.
  std::vector<double> joint_values;
  std::vector<double> exact_values;
  double max_value_delta = 0.0;
  double max_message_delta = 0.0;
  double feasibility_violation = 0.0;
  bool feasibility_sampled = false;
  /// True when the centralized objective equals the exact one within tol.
  bool representable = false;
};

/// Throws OracleCapError when the flat MDP exceeds `oracle_cap`.
Comparison compare_with_oracles(const SubsystemTree& tree, const RelevanceWeights& weights, const PlanResult& plan,
                                const RunConfig& config);
nlohmann::json comparison_json(const SubsystemTree& tree, const Comparison& cmp);

/// Wraps command-specific sections with the schema version, command name,
/// configuration and model summary.
nlohmann::json make_report(const std::string& command, const RunConfig& config, const SubsystemTree& tree,
                           const RelevanceWeights& weights);

/// Two-space indented JSON with a trailing newline. Numbers use the
/// shortest text that reads back as the same double.
std::string dump_report(const nlohmann::json& report);

}  // namespace hfmdp
