#include "hfmdp/report.hpp"

#include <algorithm>
#include <cmath>

#include "hfmdp/errors.hpp"
#include "hfmdp/oracle.hpp"

namespace hfmdp {

using nlohmann::json;

void RunConfig::check() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(name) + " must be a positive number");
  };
  positive(convergence_tolerance, "convergence tolerance");
  positive(feasibility_tolerance, "feasibility tolerance");
  positive(duplicate_tolerance, "duplicate tolerance");
  if (message_bound) positive(*message_bound, "message bound");
  if (max_iterations < 1) throw InputError("iteration cap must be at least 1");
  if (oracle_cap < 1) throw InputError("oracle cap must be at least 1");
  if (episodes < 1) throw InputError("episode count must be at least 1");
}

PlannerConfig RunConfig::planner_config(ReuseCache* cache) const {
  PlannerConfig pc;
  pc.schedule = schedule;
  pc.seed = seed;
  pc.max_iterations = max_iterations;
  pc.convergence_tolerance = convergence_tolerance;
  pc.duplicate_tolerance = duplicate_tolerance;
  pc.message_bound = message_bound;
  pc.cache = reuse ? cache : nullptr;
  return pc;
}

json config_json(const RunConfig& c) {
  json j;
  j["schedule"] = to_string(c.schedule);
  j["seed"] = c.seed;
  j["max_iterations"] = c.max_iterations;
  j["convergence_tolerance"] = c.convergence_tolerance;
  j["feasibility_tolerance"] = c.feasibility_tolerance;
  j["duplicate_tolerance"] = c.duplicate_tolerance;
  j["message_bound"] = c.message_bound ? json(*c.message_bound) : json(nullptr);
  j["reuse"] = c.reuse;
  j["oracle_cap"] = c.oracle_cap;
  j["horizon"] = c.horizon;
  j["episodes"] = c.episodes;
  return j;
}

namespace {

json names(const VariableSet& vars, const Scope& s) {
  json out = json::array();
  for (VarId v : s.vars()) out.push_back(vars[v].name);
  return out;
}

json assignment_json(const VariableSet& vars, const Assignment& a) {
  json out = json::object();
  for (std::size_t i = 0; i < a.scope.size(); ++i) out[vars[a.scope.var(i)].name] = vars[a.scope.var(i)].domain[a.values[i]];
  return out;
}

}  // namespace

json model_json(const SubsystemTree& tree, const RelevanceWeights& weights) {
  const VariableSet& vars = tree.variables();
  json j;
  j["discount"] = tree.discount();
  j["variables"] = json::array();
  for (VarId v = 0; v < vars.size(); ++v) j["variables"].push_back({{"name", vars[v].name}, {"domain", vars[v].domain}});
  j["subsystems"] = json::array();
  for (std::size_t k = 0; k < tree.size(); ++k) {
    const auto& s = tree.subsystem(k);
    json e;
    e["name"] = s.name;
    e["class"] = s.class_name.empty() ? json(nullptr) : json(s.class_name);
    e["parent"] = tree.parent(k) ? json(tree.subsystem(*tree.parent(k)).name) : json(nullptr);
    e["internal"] = names(vars, s.internal);
    e["external"] = names(vars, s.external);
    e["separator"] = names(vars, tree.sepset(k));
    e["weights"] = weights[k];
    j["subsystems"].push_back(std::move(e));
  }
  return j;
}

json validation_json(const ValidationReport& report) {
  json j;
  j["clean"] = report.clean();
  j["violations"] = json::array();
  for (const auto& v : report.violations) {
    j["violations"].push_back({{"kind", to_string(v.kind)},
                               {"subsystems", v.subsystems},
                               {"variables", v.variables},
                               {"magnitude", v.magnitude},
                               {"detail", v.detail}});
  }
  return j;
}

json trace_event_json(const TraceEvent& e) {
  return json{{"round", e.round},
              {"agent", e.agent},
              {"event", e.event},
              {"status", e.status},
              {"message_norm", e.message_norm},
              {"objective", e.objective},
              {"local_rows", e.local_rows},
              {"subtree_rows", e.subtree_rows},
              {"cache_hit", e.cache_hit}};
}

json plan_json(const SubsystemTree& tree, const PlanResult& r) {
  const VariableSet& vars = tree.variables();
  json j;
  j["converged"] = r.converged;
  j["failure"] = r.failure.empty() ? json(nullptr) : json(r.failure);
  j["rounds"] = r.rounds;
  j["objective"] = r.objective;
  j["message_bound"] = r.message_bound;
  j["bound_doublings"] = r.bound_doublings;
  j["values"] = json::array();
  j["messages"] = json::array();
  for (std::size_t k = 0; k < tree.size(); ++k) {
    const auto& s = tree.subsystem(k);
    j["values"].push_back({{"subsystem", s.name}, {"scope", names(vars, s.internal)},
                           {"table", k < r.values.size() ? json(r.values[k]) : json::array()}});
    if (!tree.parent(k)) continue;
    j["messages"].push_back({{"subsystem", s.name}, {"separator", names(vars, tree.sepset(k))},
                             {"table", k < r.messages.size() ? json(r.messages[k].values) : json::array()}});
  }
  j["root_objectives"] = json::array();
  for (const auto& [obj, bound] : r.root_objectives) j["root_objectives"].push_back({{"objective", obj}, {"bound", bound}});
  j["local_bank_rows"] = r.local_bank_rows;
  const auto& c = r.counters;
  j["counters"] = {{"standalone_solves", c.standalone_solves}, {"message_lp_solves", c.message_lp_solves},
                   {"memo_hits", c.memo_hits},                 {"shared_flow_rows", c.shared_flow_rows},
                   {"shared_subtree_rows", c.shared_subtree_rows}, {"reward_messages", c.reward_messages},
                   {"flow_messages", c.flow_messages}};
  j["trace"] = json::array();
  for (const auto& e : r.trace) j["trace"].push_back(trace_event_json(e));
  return j;
}

json episode_json(const SubsystemTree& tree, const Episode& ep) {
  const VariableSet& vars = tree.variables();
  json steps = json::array();
  for (std::size_t t = 0; t < ep.actions.size(); ++t)
    steps.push_back({{"state", assignment_json(vars, ep.states[t])},
                     {"action", assignment_json(vars, ep.actions[t])},
                     {"reward", ep.rewards[t]}});
  return json{{"discounted_return", ep.discounted_return},
              {"final_state", ep.states.empty() ? json(nullptr) : assignment_json(vars, ep.states.back())},
              {"steps", std::move(steps)}};
}

Comparison compare_with_oracles(const SubsystemTree& tree, const RelevanceWeights& weights, const PlanResult& plan,
                                const RunConfig& config) {
  Comparison c;
  c.distributed_objective = plan.objective;
  const auto central = centralized_factored_lp(tree, weights, plan.message_bound);
  c.centralized_objective = central.objective;
  for (std::size_t k = 0; k < tree.size(); ++k) {
    if (!tree.parent(k) || k >= plan.messages.size()) continue;
    // Messages are only determined up to a constant per edge.
    double lo = 0.0, hi = 0.0;
    const auto& a = plan.messages[k].values;
    const auto& b = central.messages[k];
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
      const double d = a[i] - b[i];
      lo = i ? std::min(lo, d) : d;
      hi = i ? std::max(hi, d) : d;
    }
    c.max_message_delta = std::max(c.max_message_delta, (hi - lo) / 2.0);
  }

  const EquivalentMdp mdp = build_equivalent_mdp(tree, config.oracle_cap);
  const JointDynamics jd(tree);
  c.joint_values.resize(mdp.states);
  for (std::size_t s = 0; s < mdp.states; ++s)
    for (std::size_t k = 0; k < tree.size(); ++k) c.joint_values[s] += plan.values[k][jd.internal_index(k, s)];
  const auto alpha = global_relevance_weights(tree, weights, config.oracle_cap);
  const auto exact = exact_bellman_lp(mdp, alpha);
  c.exact_objective = exact.objective;
  c.exact_values = exact.value;
  for (std::size_t s = 0; s < mdp.states; ++s)
    c.max_value_delta = std::max(c.max_value_delta, std::abs(c.joint_values[s] - exact.value[s]));
  c.representable = std::abs(central.objective - exact.objective) <= 1e-6 * std::max(1.0, std::abs(exact.objective));

  const auto feas = check_global_feasibility(tree, plan.values, 4096, config.seed);
  c.feasibility_violation = feas.max_violation;
  c.feasibility_sampled = feas.sampled;
  return c;
}

json comparison_json(const SubsystemTree& tree, const Comparison& c) {
  json j;
  j["distributed_objective"] = c.distributed_objective;
  j["centralized_objective"] = c.centralized_objective;
  j["centralized_delta"] = c.distributed_objective - c.centralized_objective;
  j["exact_objective"] = c.exact_objective ? json(*c.exact_objective) : json(nullptr);
  j["exact_delta"] = c.exact_objective ? json(c.distributed_objective - *c.exact_objective) : json(nullptr);
  j["representable"] = c.representable;
  j["max_message_delta_up_to_constant"] = c.max_message_delta;
  j["max_joint_value_delta"] = c.max_value_delta;
  j["feasibility_violation"] = c.feasibility_violation;
  j["feasibility_sampled"] = c.feasibility_sampled;
  j["joint_state_scope"] = names(tree.variables(), tree.internal_vars());
  j["joint_values"] = c.joint_values;
  j["exact_values"] = c.exact_values;
  return j;
}

json make_report(const std::string& command, const RunConfig& config, const SubsystemTree& tree,
                 const RelevanceWeights& weights) {
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["command"] = command;
  j["config"] = config_json(config);
  j["model"] = model_json(tree, weights);
  return j;
}

std::string dump_report(const json& report) { return report.dump(2) + "\n"; }

}  // namespace hfmdp
