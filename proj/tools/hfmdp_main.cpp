// Command-line front end: validate, plan, execute and compare subsystem-tree
// models. Reports are JSON (schema/report.schema.json).

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "hfmdp/action_selection.hpp"
#include "hfmdp/coordinator.hpp"
#include "hfmdp/errors.hpp"
#include "hfmdp/model_io.hpp"
#include "hfmdp/report.hpp"
#include "hfmdp/reuse.hpp"
#include "hfmdp/validation.hpp"

namespace {

using hfmdp::RunConfig;
using nlohmann::json;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kParse = 2,
  kValidation = 3,
  kNonConvergence = 4,
  kOracleCap = 5,
};

enum class LogLevel { Off, Info, Trace };

LogLevel log_level() {
  const char* v = std::getenv("HFMDP_LOG");
  if (!v) return LogLevel::Off;
  const std::string s(v);
  if (s == "trace" || s == "debug") return LogLevel::Trace;
  if (s == "info" || s == "1") return LogLevel::Info;
  return LogLevel::Off;
}

void log_info(const std::string& event, json fields = json::object()) {
  if (log_level() == LogLevel::Off) return;
  fields["event"] = event;
  std::cerr << fields.dump() << '\n';
}

struct Options {
  std::string model;
  std::string out;
  std::string schedule = "sync";
  std::string reuse = "on";
  std::string cache;
  std::string start;
  double message_bound = 0.0;
  RunConfig run;
};

void write_output(const Options& o, const json& report) {
  const std::string text = hfmdp::dump_report(report);
  if (o.out.empty() || o.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out, std::ios::binary);
  if (!f) throw hfmdp::InputError("cannot write report to '" + o.out + "'");
  f << text;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

/// Parses "x=1,y=0" against the tree-internal variables; unspecified
/// variables take their first value.
hfmdp::Assignment parse_start(const hfmdp::SubsystemTree& tree, const std::string& text) {
  const auto& vars = tree.variables();
  hfmdp::Assignment a{tree.internal_vars(), std::vector<std::uint32_t>(tree.internal_vars().size(), 0)};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw hfmdp::InputError("--start expects name=value pairs, got '" + item + "'");
    const auto id = vars.find(item.substr(0, eq));
    if (!id) throw hfmdp::InputError("--start names unknown variable '" + item.substr(0, eq) + "'");
    const auto pos = a.scope.position(*id);
    if (!pos) throw hfmdp::InputError("--start variable '" + item.substr(0, eq) + "' is not a state variable");
    const auto v = vars.value_index(*id, item.substr(eq + 1));
    if (!v) throw hfmdp::InputError("--start value '" + item.substr(eq + 1) + "' is not in the domain");
    a.values[*pos] = *v;
  }
  return a;
}

struct Session {
  const Options& o;
  RunConfig cfg;
  std::optional<hfmdp::LoadedModel> model;
  hfmdp::ReuseCache cache;
  json report;

  explicit Session(const Options& opts) : o(opts), cfg(opts.run) {
    cfg.schedule = hfmdp::parse_schedule(o.schedule);
    if (o.reuse != "on" && o.reuse != "off") throw hfmdp::InputError("--reuse expects 'on' or 'off'");
    cfg.reuse = o.reuse == "on";
    if (o.message_bound > 0.0) cfg.message_bound = o.message_bound;
    cfg.check();
  }

  void load(const std::string& command) {
    model.emplace(hfmdp::load_model(o.model));
    report = hfmdp::make_report(command, cfg, model->tree, model->weights);
    log_info("model-loaded", {{"subsystems", model->tree.size()}});
  }

  /// Returns false (after recording it) when validation fails.
  bool validate() {
    hfmdp::Tolerances tol;
    const auto vr = hfmdp::validate(model->tree, &model->weights, tol);
    report["validation"] = hfmdp::validation_json(vr);
    log_info("validated", {{"clean", vr.clean()}, {"violations", vr.violations.size()}});
    return vr.clean();
  }

  hfmdp::PlanResult plan() {
    if (!o.cache.empty() && cfg.reuse) {
      std::ifstream in(o.cache, std::ios::binary);
      if (in) cache = hfmdp::ReuseCache::load(in);
    }
    auto pc = cfg.planner_config(&cache);
    if (log_level() == LogLevel::Trace)
      pc.on_event = [](const hfmdp::TraceEvent& e) { std::cerr << hfmdp::trace_event_json(e).dump() << '\n'; };
    const auto t0 = std::chrono::steady_clock::now();
    hfmdp::PlanResult r = hfmdp::run_planner(model->tree, model->weights, pc);
    if (cfg.timing) report["timing"]["plan_ms"] = elapsed_ms(t0);
    report["plan"] = hfmdp::plan_json(model->tree, r);
    if (cfg.reuse) {
      const auto& l = cache.ledger();
      report["plan"]["reuse"] = {{"standalone_solves_avoided", l.standalone_solves_avoided},
                                 {"flow_rows_donated", l.flow_rows_donated},
                                 {"flow_rows_rejected", l.flow_rows_rejected},
                                 {"subtree_rows_donated", l.subtree_rows_donated}};
    }
    if (!o.cache.empty() && cfg.reuse) {
      std::ofstream out(o.cache, std::ios::binary);
      if (!out) throw hfmdp::InputError("cannot write cache '" + o.cache + "'");
      cache.save(out);
    }
    log_info("planned", {{"objective", r.objective}, {"rounds", r.rounds}});
    return r;
  }
};

int run_command(const std::string& command, const Options& o) {
  Session s(o);
  s.load(command);
  const bool clean = s.validate();
  if (command == "validate" || !clean) {
    write_output(o, s.report);
    return clean ? kOk : kValidation;
  }
  hfmdp::PlanResult plan;
  try {
    plan = s.plan();
  } catch (const hfmdp::NonConvergenceError& e) {
    s.report["plan"] = hfmdp::plan_json(s.model->tree, e.partial());
    write_output(o, s.report);
    std::cerr << "hfmdp: " << e.what() << '\n';
    return kNonConvergence;
  }
  const auto& tree = s.model->tree;
  if (command == "execute") {
    const auto q = hfmdp::compute_q(tree, plan.values);
    const auto start = parse_start(tree, o.start);
    s.report["episodes"] = json::array();
    for (std::size_t e = 0; e < s.cfg.episodes; ++e) {
      const auto ep = hfmdp::simulate_episode(tree, q, start, s.cfg.horizon, s.cfg.seed + e, s.cfg.oracle_cap);
      s.report["episodes"].push_back(hfmdp::episode_json(tree, ep));
    }
  } else if (command == "compare") {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cmp = hfmdp::compare_with_oracles(tree, s.model->weights, plan, s.cfg);
    if (s.cfg.timing) s.report["timing"]["compare_ms"] = elapsed_ms(t0);
    s.report["compare"] = hfmdp::comparison_json(tree, cmp);
  }
  write_output(o, s.report);
  return kOk;
}

void add_common(CLI::App* cmd, Options& o, bool planning) {
  cmd->add_option("--model", o.model, "Model file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "Report path ('-' or omitted for stdout)");
  if (!planning) return;
  cmd->add_option("--seed", o.run.seed, "Seed for the random schedule and simulation");
  cmd->add_option("--schedule", o.schedule, "sync, leaves-first or random")
      ->check(CLI::IsMember({"sync", "leaves-first", "random"}));
  cmd->add_option("--max-iters", o.run.max_iterations, "Coordination round cap");
  cmd->add_option("--tol", o.run.convergence_tolerance, "Convergence tolerance on message changes");
  cmd->add_option("--feas-tol", o.run.feasibility_tolerance, "Feasibility tolerance");
  cmd->add_option("--dup-tol", o.run.duplicate_tolerance, "Duplicate-policy tolerance");
  cmd->add_option("--message-bound", o.message_bound, "Initial box on message entries (default: derived from rewards)");
  cmd->add_option("--reuse", o.reuse, "Plan reuse between equivalent subsystems: on or off")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--cache", o.cache, "Reuse cache file, loaded if present and saved afterwards");
  cmd->add_option("--oracle-cap", o.run.oracle_cap, "Largest flat state-action count the exact oracles accept");
  cmd->add_flag("--timing", o.run.timing, "Include wall-clock timings in the report");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed planning for subsystem-tree MDPs"};
  app.require_subcommand(1);
  Options o;
  auto* validate = app.add_subcommand("validate", "Check a model and report violations");
  auto* plan = app.add_subcommand("plan", "Run the distributed planner");
  auto* execute = app.add_subcommand("execute", "Plan, then simulate greedy episodes");
  auto* compare = app.add_subcommand("compare", "Plan, then compare against the centralized oracles");
  add_common(validate, o, false);
  for (auto* cmd : {plan, execute, compare}) add_common(cmd, o, true);
  execute->add_option("--horizon", o.run.horizon, "Steps per episode");
  execute->add_option("--episodes", o.run.episodes, "Number of episodes");
  execute->add_option("--start", o.start, "Start state as name=value pairs separated by commas");

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run_command(command, o);
  } catch (const hfmdp::ParseError& e) {
    std::cerr << "hfmdp: " << o.model << ": " << e.what() << '\n';
    return kParse;
  } catch (const hfmdp::StructureError& e) {
    std::cerr << "hfmdp: " << o.model << ": " << e.what() << '\n';
    return kParse;
  } catch (const hfmdp::OracleCapError& e) {
    std::cerr << "hfmdp: " << e.what() << '\n';
    return kOracleCap;
  } catch (const hfmdp::DegenerateModelError& e) {
    std::cerr << "hfmdp: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "hfmdp: " << e.what() << '\n';
    return kFailure;
  }
}
