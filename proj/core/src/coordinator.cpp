#include "hfmdp/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <variant>

#include "hfmdp/reuse.hpp"
#include "hfmdp/validation.hpp"

namespace hfmdp {

// ---------------------------------------------------------------------------
// Message LP

LinearProgram build_message_lp(const MessageLpInput& input, bool boxed) {
  const LocalPolicyBank& local = *input.local;
  const std::size_t c = input.children.size();
  if (local.separators().size() != c + 1)
    throw InputError("local policy bank does not match the number of children");
  std::vector<Eigen::Index> offset(c + 1);
  offset[0] = static_cast<Eigen::Index>(1 + c);
  for (std::size_t i = 0; i < c; ++i)
    offset[i + 1] = offset[i] + static_cast<Eigen::Index>(local.separators()[i + 1].assignment_count());
  const Eigen::Index n = offset[c];

  LinearProgram lp = LinearProgram::with_variables(n);
  for (Eigen::Index v = 0; v < n; ++v) {
    if (v <= static_cast<Eigen::Index>(c)) {
      lp.cost(v) = 1.0;
      lp.set_free(v);
    } else if (boxed) {
      lp.set_bounds(v, -input.message_bound, input.message_bound);
    } else {
      lp.set_free(v);
    }
  }

  std::size_t rows = local.rows();
  for (const auto* b : input.children) rows += b->rows();
  lp.a_ge = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), n);
  lp.b_ge.resize(static_cast<Eigen::Index>(rows));

  Eigen::Index r = 0;
  for (std::size_t p = 0; p < local.rows(); ++p, ++r) {
    lp.a_ge(r, 0) = 1.0;
    double rhs = local.value(p);
    const auto& own = local.marginal(p, 0);
    for (std::size_t z = 0; z < own.size(); ++z) rhs -= own[z] * input.own->values[z];
    for (std::size_t i = 0; i < c; ++i) {
      const auto& m = local.marginal(p, i + 1);
      for (std::size_t z = 0; z < m.size(); ++z) lp.a_ge(r, offset[i] + static_cast<Eigen::Index>(z)) = -m[z];
    }
    lp.b_ge(r) = rhs;
  }
  for (std::size_t i = 0; i < c; ++i) {
    const SubtreePolicyBank& bank = *input.children[i];
    for (std::size_t p = 0; p < bank.rows(); ++p, ++r) {
      lp.a_ge(r, static_cast<Eigen::Index>(1 + i)) = 1.0;
      const auto& f = bank.frequencies(p);
      for (std::size_t z = 0; z < f.size(); ++z) lp.a_ge(r, offset[i] + static_cast<Eigen::Index>(z)) = f[z];
      lp.b_ge(r) = bank.value(p);
    }
  }
  return lp;
}

namespace {

/// Mixture weights of one block from its θ-row duals. Stationarity in θ
/// makes them sum to one already; renormalising only removes round-off. A
/// block with no positive dual falls back to its tightest row.
std::vector<double> block_weights(const LpSolution& sol, const LinearProgram& lp, Eigen::Index first,
                                  Eigen::Index count) {
  std::vector<double> w(static_cast<std::size_t>(count), 0.0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < count; ++i) {
    w[static_cast<std::size_t>(i)] = std::max(0.0, sol.dual(first + i));
    total += w[static_cast<std::size_t>(i)];
  }
  if (total > 0.0) {
    for (double& x : w) x /= total;
    return w;
  }
  const Eigen::VectorXd slack = lp.a_ge.middleRows(first, count) * sol.primal - lp.b_ge.segment(first, count);
  Eigen::Index best = 0;
  slack.minCoeff(&best);
  w[static_cast<std::size_t>(best)] = 1.0;
  return w;
}

}  // namespace

MessageLpSolution solve_message_lp(const MessageLpInput& input, const std::vector<Scope>& child_separators,
                                   const SimplexOptions& options) {
  const std::size_t c = input.children.size();
  const double bound = input.message_bound;
  MessageLpSolution out;

  const LinearProgram probe_lp = build_message_lp(input, /*boxed=*/false);
  const LpSolution probe = solve(probe_lp, options);
  out.iterations = probe.iterations;
  if (probe.status == LpStatus::Infeasible) throw SolverError("message LP is infeasible");
  out.probe_status = probe.status;
  const Eigen::Index first_s = static_cast<Eigen::Index>(1 + c);

  auto split_messages = [&](const Eigen::VectorXd& primal) {
    std::vector<RewardMessage> msgs;
    Eigen::Index col = first_s;
    for (std::size_t i = 0; i < c; ++i) {
      RewardMessage msg = RewardMessage::zero(child_separators[i]);
      for (double& v : msg.values) v = primal(col++);
      if (!msg.values.empty()) {
        const auto [lo, hi] = std::minmax_element(msg.values.begin(), msg.values.end());
        const double shift = -(*lo + *hi) / 2.0;
        for (double& v : msg.values) v += shift;
      }
      msgs.push_back(std::move(msg));
    }
    return msgs;
  };
  auto inside = [&](const std::vector<RewardMessage>& msgs) {
    for (const auto& m : msgs)
      for (double v : m.values)
        if (std::abs(v) > bound) return false;
    return true;
  };

  const LinearProgram* weights_lp = &probe_lp;
  const LpSolution* weights_from = &probe;
  LinearProgram boxed_lp;
  LpSolution boxed;
  if (probe.status == LpStatus::Optimal) {
    out.objective = probe.objective;
    out.child_messages = split_messages(probe.primal);
  }
  if (probe.status != LpStatus::Optimal || !inside(out.child_messages)) {
    boxed_lp = build_message_lp(input, /*boxed=*/true);
    boxed = solve(boxed_lp, options);
    out.iterations += boxed.iterations;
    if (boxed.status != LpStatus::Optimal)
      throw SolverError(std::string("boxed message LP is ") + to_string(boxed.status));
    out.child_messages = split_messages(boxed.primal);
    if (probe.status == LpStatus::Optimal) {
      // Same optimum reached inside the box; the mixture still comes from
      // the unboxed duals, which satisfy flow matching exactly.
      out.objective = probe.objective;
    } else {
      out.objective = boxed.objective;
      weights_lp = &boxed_lp;
      weights_from = &boxed;
      for (Eigen::Index v = first_s; v < boxed_lp.variable_count(); ++v) {
        if (std::abs(boxed.primal(v)) >= bound * (1.0 - 1e-12) && std::abs(boxed.reduced_cost(v)) > 1e-9)
          out.active_bounds.emplace_back(0, static_cast<std::size_t>(v - first_s));
      }
      for (auto& [child, entry] : out.active_bounds) {
        std::size_t flat = entry, i = 0;
        while (flat >= child_separators[i].assignment_count()) flat -= child_separators[i++].assignment_count();
        child = i;
        entry = flat;
      }
    }
  }

  Eigen::Index row = 0;
  const auto local_rows = static_cast<Eigen::Index>(input.local->rows());
  out.local_weights = block_weights(*weights_from, *weights_lp, row, local_rows);
  row += local_rows;
  for (std::size_t i = 0; i < c; ++i) {
    const auto rows = static_cast<Eigen::Index>(input.children[i]->rows());
    out.child_weights.push_back(block_weights(*weights_from, *weights_lp, row, rows));
    row += rows;
  }
  return out;
}

SubtreeRow subtree_statistics(const MessageLpSolution& solution, const MessageLpInput& input) {
  SubtreeRow row;
  const LocalPolicyBank& local = *input.local;
  row.frequencies.assign(local.separators()[0].assignment_count(), 0.0);
  for (std::size_t p = 0; p < local.rows(); ++p) {
    const double w = solution.local_weights[p];
    if (w == 0.0) continue;
    row.value += w * local.value(p);
    const auto& m = local.marginal(p, 0);
    for (std::size_t z = 0; z < m.size(); ++z) row.frequencies[z] += w * m[z];
  }
  for (std::size_t i = 0; i < input.children.size(); ++i)
    for (std::size_t p = 0; p < input.children[i]->rows(); ++p)
      row.value += solution.child_weights[i][p] * input.children[i]->value(p);
  return row;
}

double default_message_bound(const SubsystemTree& tree) {
  double total = 0.0;
  for (const auto& s : tree.subsystems()) {
    double m = 0.0;
    for (double r : s.reward) m = std::max(m, std::abs(r));
    total += m;
  }
  return std::max(1.0, 10.0 * total / (1.0 - tree.discount()));
}

// ---------------------------------------------------------------------------
// Agents

namespace {

/// Everything one agent may know: its own subsystem, the separators on its
/// tree edges and the identities of its neighbours. No other agent's data.
struct AgentView {
  std::size_t id = 0;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;
  BasicSubsystem subsystem;
  Scope scope;
  Scope own_separator;
  std::vector<Scope> child_separators;
  double discount = 0.0;
  std::vector<double> weights;
  // Reuse keys, empty when reuse is off.
  ClassSignature cls;
  std::string flow_key;
  SubtreeSignature subtree;
};

struct Envelope {
  std::size_t from = 0;
  std::size_t to = 0;
  std::variant<RewardMessage, FlowMessage> body;
};

/// Instrumentation shared by all agents. Agents only append to it; nothing
/// here feeds back into planning decisions.
struct Context {
  const PlannerConfig* config = nullptr;
  ReuseCache* cache = nullptr;
  std::size_t round = 0;
  double bound = 0.0;
  PlanResult* result = nullptr;

  void emit(TraceEvent e) {
    e.round = round;
    if (config->on_event) config->on_event(e);
    result->trace.push_back(std::move(e));
  }
};

class Agent {
 public:
  Agent(AgentView view, Context& ctx)
      : v_(std::move(view)),
        ctx_(&ctx),
        own_msg_(RewardMessage::zero(v_.own_separator)),
        outgoing_(v_.own_separator) {
    std::vector<Scope> seps{v_.own_separator};
    for (const auto& s : v_.child_separators) {
      seps.push_back(s);
      child_msgs_.push_back(RewardMessage::zero(s));
      child_banks_.emplace_back(s);
    }
    local_ = LocalPolicyBank(std::move(seps));
  }

  bool is_leaf() const { return v_.children.empty(); }
  std::size_t id() const { return v_.id; }

  void receive(const RewardMessage& msg) {
    own_msg_ = msg;
    plan_dirty_ = true;
    if (!is_leaf()) master_dirty_ = true;
  }

  void receive(const FlowMessage& msg) {
    const auto pos = child_position(msg.sender);
    bool changed = false;
    for (std::size_t r = 0; r < msg.values.size(); ++r)
      changed |= child_banks_[pos].record(msg.values[r], msg.frequencies[r], ctx_->config->duplicate_tolerance);
    if (changed) {
      master_dirty_ = true;
      ++activity_;
    }
  }

  /// Coordination step for this agent: re-solve the message LP when any of its
  /// inputs changed and every bank it needs is populated.
  void message_step(std::vector<Envelope>& out) {
    if (is_leaf() || !master_dirty_ || !ready()) return;
    master_dirty_ = false;
    MessageLpInput in = input();
    MessageLpSolution sol = solve_message_lp(in, v_.child_separators, ctx_->config->lp);
    ++ctx_->result->counters.message_lp_solves;
    last_active_ = !sol.bounded();

    TraceEvent e;
    e.agent = v_.id;
    e.event = "message-lp";
    e.status = to_string(sol.probe_status);
    e.objective = sol.objective;
    e.local_rows = local_.rows();
    for (const auto& b : child_banks_) e.subtree_rows += b.rows();
    for (const auto& m : sol.child_messages)
      for (double x : m.values) e.message_norm = std::max(e.message_norm, std::abs(x));
    ctx_->emit(std::move(e));
    if (!v_.parent) ctx_->result->root_objectives.emplace_back(sol.objective, ctx_->bound);

    for (std::size_t i = 0; i < v_.children.size(); ++i) {
      if (sol.child_messages[i].max_abs_difference(child_msgs_[i]) <= ctx_->config->convergence_tolerance) continue;
      child_msgs_[i] = sol.child_messages[i];
      plan_dirty_ = true;
      out.push_back({v_.id, v_.children[i], child_msgs_[i]});
    }
    // A box-bound mixture need not match flows with the children, so it is
    // not a policy of this subtree and would be an invalid cut upstream.
    if (v_.parent && sol.bounded()) publish(subtree_statistics(sol, in), out);
  }

  /// Planning step for this agent: re-solve the stand-alone MDP when the
  /// messages it sees changed, and record the resulting policy.
  void planning_step(std::vector<Envelope>& out) {
    bool bank_changed = false;
    if (ctx_->cache) {
      const std::size_t added = share_flows(*ctx_->cache, v_.flow_key, flow_cursor_, v_.subsystem, v_.discount,
                                            v_.weights, local_);
      if (added > 0) {
        bank_changed = true;
        ctx_->result->counters.shared_flow_rows += added;
        TraceEvent e;
        e.agent = v_.id;
        e.event = "shared-flows";
        e.local_rows = local_.rows();
        ctx_->emit(std::move(e));
      }
    }
    if (plan_dirty_) {
      plan_dirty_ = false;
      const auto reward = adjusted_reward();
      bool hit = false;
      std::string key;
      if (ctx_->cache) {
        key = ReuseCache::solution_key(v_.cls, v_.discount, v_.weights, reward);
        if (const FlowSolution* f = ctx_->cache->find_solution(key)) {
          last_ = *f;
          hit = true;
          ++ctx_->result->counters.memo_hits;
          ++ctx_->cache->ledger().standalone_solves_avoided;
        }
      }
      if (!hit) {
        last_ = solve_standalone(v_.subsystem, v_.discount, reward, v_.weights, ctx_->config->lp);
        ++ctx_->result->counters.standalone_solves;
        if (ctx_->cache) ctx_->cache->store_solution(key, last_);
      }
      solved_ = true;
      if (ctx_->cache) ctx_->cache->add_flow(v_.flow_key, last_.flow);
      bank_changed |= record_policy(local_, last_, v_.scope, v_.subsystem.reward, ctx_->config->duplicate_tolerance);
      if (ctx_->config->on_policy) ctx_->config->on_policy(v_.id, last_);

      TraceEvent e;
      e.agent = v_.id;
      e.event = "standalone";
      e.status = "optimal";
      e.objective = last_.adjusted_objective;
      e.local_rows = local_.rows();
      e.cache_hit = hit;
      ctx_->emit(std::move(e));
    }
    if (bank_changed) {
      ++activity_;
      if (is_leaf()) {
        // A leaf's subtree policies are its own policies.
        for (; sent_local_ < local_.rows(); ++sent_local_)
          if (v_.parent) publish({local_.value(sent_local_), local_.marginal(sent_local_, 0)}, out);
      } else {
        master_dirty_ = true;
      }
    }
    if (ctx_->cache && v_.parent) {
      std::size_t sent = 0;
      for (auto& row : share_subtree_rows(*ctx_->cache, v_.subtree, v_.subtree, subtree_cursor_))
        if (send_row(row, out)) ++sent;
      if (sent > 0) {
        ctx_->result->counters.shared_subtree_rows += sent;
        TraceEvent e;
        e.agent = v_.id;
        e.event = "shared-subtree-rows";
        e.subtree_rows = sent;
        ctx_->emit(std::move(e));
      }
    }
  }

  bool pending() const { return plan_dirty_ || (master_dirty_ && !is_leaf() && ready()); }
  std::size_t take_activity() { return std::exchange(activity_, 0); }
  bool box_active() const { return last_active_; }
  void force_master() {
    if (!is_leaf()) master_dirty_ = true;
  }

  const FlowSolution& last_solution() const { return last_; }
  bool solved() const { return solved_; }
  const RewardMessage& own_message() const { return own_msg_; }
  std::size_t local_rows() const { return local_.rows(); }

 private:
  std::size_t child_position(std::size_t child) const {
    auto it = std::find(v_.children.begin(), v_.children.end(), child);
    if (it == v_.children.end()) throw SolverError("flow message from a non-child");
    return static_cast<std::size_t>(it - v_.children.begin());
  }

  bool ready() const {
    if (local_.empty()) return false;
    return std::none_of(child_banks_.begin(), child_banks_.end(), [](const auto& b) { return b.empty(); });
  }

  MessageLpInput input() const {
    MessageLpInput in;
    in.local = &local_;
    for (const auto& b : child_banks_) in.children.push_back(&b);
    in.own = &own_msg_;
    in.message_bound = ctx_->bound;
    return in;
  }

  std::vector<double> adjusted_reward() const {
    std::vector<double> r = v_.subsystem.reward;
    auto apply = [&](const RewardMessage& msg, double sign) {
      const auto proj = projection(v_.scope, msg.separator);
      for (std::size_t z = 0; z < r.size(); ++z) r[z] += sign * msg.values[proj[z]];
    };
    for (const auto& m : child_msgs_) apply(m, +1.0);
    apply(own_msg_, -1.0);
    return r;
  }

  void publish(SubtreeRow row, std::vector<Envelope>& out) {
    if (ctx_->cache) ctx_->cache->add_subtree_row(v_.subtree, row);
    send_row(row, out);
  }

  bool send_row(const SubtreeRow& row, std::vector<Envelope>& out) {
    if (!outgoing_.record(row.value, row.frequencies, ctx_->config->duplicate_tolerance)) return false;
    FlowMessage msg;
    msg.sender = v_.id;
    msg.values.push_back(row.value);
    msg.frequencies.push_back(row.frequencies);
    out.push_back({v_.id, *v_.parent, std::move(msg)});
    return true;
  }

  AgentView v_;
  Context* ctx_;
  RewardMessage own_msg_;
  std::vector<RewardMessage> child_msgs_;
  LocalPolicyBank local_;
  std::vector<SubtreePolicyBank> child_banks_;
  SubtreePolicyBank outgoing_;
  std::size_t sent_local_ = 0;
  std::size_t flow_cursor_ = 0;
  std::size_t subtree_cursor_ = 0;
  FlowSolution last_;
  bool solved_ = false;
  bool plan_dirty_ = true;
  bool master_dirty_ = false;
  bool last_active_ = false;
  std::size_t activity_ = 0;
};

/// Delivers envelopes, refusing anything that does not travel along a tree
/// edge.
class Mailbox {
 public:
  explicit Mailbox(const SubsystemTree& tree) : tree_(&tree) {}

  std::size_t deliver(std::vector<Envelope>& batch, std::vector<Agent>& agents, Context& ctx) {
    const std::size_t n = batch.size();
    for (auto& env : batch) {
      const bool edge = tree_->parent(env.to) == env.from || tree_->parent(env.from) == env.to;
      if (!edge) throw SolverError("message between non-neighbours " + std::to_string(env.from) + " and " +
                                   std::to_string(env.to));
      TraceEvent e;
      e.agent = env.from;
      if (auto* rm = std::get_if<RewardMessage>(&env.body)) {
        e.event = "reward-message";
        for (double v : rm->values) e.message_norm = std::max(e.message_norm, std::abs(v));
        ++ctx.result->counters.reward_messages;
        agents[env.to].receive(*rm);
      } else {
        const auto& fm = std::get<FlowMessage>(env.body);
        e.event = "flow-message";
        e.subtree_rows = fm.values.size();
        e.objective = fm.values.empty() ? 0.0 : fm.values.front();
        ++ctx.result->counters.flow_messages;
        agents[env.to].receive(fm);
      }
      e.status = "to " + std::to_string(env.to);
      ctx.emit(std::move(e));
    }
    batch.clear();
    return n;
  }

 private:
  const SubsystemTree* tree_;
};

std::string first_violation(const ValidationReport& report) {
  const auto& v = report.violations.front();
  return std::string(to_string(v.kind)) + ": " + v.detail;
}

}  // namespace

PlanResult run_planner(const SubsystemTree& tree, const RelevanceWeights& weights, const PlannerConfig& config) {
  const ValidationReport report = validate(tree, &weights);
  if (!report.clean()) throw InputError("planner needs a consistent tree and weights; " + first_violation(report));
  if (config.max_iterations < 1) throw InputError("iteration cap must be at least 1");
  if (!(config.convergence_tolerance > 0.0) || !(config.duplicate_tolerance > 0.0))
    throw InputError("tolerances must be positive");

  auto result = std::make_shared<PlanResult>();
  Context ctx;
  ctx.config = &config;
  ctx.cache = config.cache;
  ctx.result = result.get();
  ctx.bound = config.message_bound.value_or(default_message_bound(tree));
  if (!(ctx.bound > 0.0)) throw InputError("message bound must be positive");

  std::vector<Agent> agents;
  agents.reserve(tree.size());
  for (std::size_t j = 0; j < tree.size(); ++j) {
    AgentView v;
    v.id = j;
    v.parent = tree.parent(j);
    v.children = tree.children(j);
    v.subsystem = tree.subsystem(j);
    v.scope = tree.scope(j);
    v.own_separator = tree.sepset(j);
    for (std::size_t k : v.children) v.child_separators.push_back(tree.sepset(k));
    v.discount = tree.discount();
    v.weights = weights[j];
    if (config.cache) {
      v.cls = class_signature(v.subsystem);
      v.flow_key = ReuseCache::flow_key(v.cls, v.discount, v.weights);
      v.subtree = subtree_signature(tree, weights, j);
    }
    agents.emplace_back(std::move(v), ctx);
  }

  Schedule schedule(config.schedule, tree, config.seed);
  Mailbox mailbox(tree);
  std::vector<Envelope> outbox;

  // Latest values and messages; agents that never solved report empty tables.
  auto snapshot = [&] {
    result->message_bound = ctx.bound;
    result->objective = 0.0;
    result->values.clear();
    result->messages.clear();
    result->local_bank_rows.clear();
    for (std::size_t j = 0; j < tree.size(); ++j) {
      const Agent& a = agents[j];
      result->values.push_back(a.solved() ? a.last_solution().value : std::vector<double>{});
      result->messages.push_back(a.own_message());
      result->local_bank_rows.push_back(a.local_rows());
      if (!a.solved()) continue;
      for (std::size_t x = 0; x < weights[j].size(); ++x) result->objective += weights[j][x] * a.last_solution().value[x];
    }
  };
  auto fail = [&](const std::string& why) {
    result->converged = false;
    result->failure = why;
    snapshot();
    throw NonConvergenceError(why, result);
  };

  for (std::size_t round = 1;; ++round) {
    if (round > config.max_iterations)
      fail("no fixpoint within " + std::to_string(config.max_iterations) + " rounds");
    ctx.round = round;
    result->rounds = round;
    const auto order = schedule.next_round();
    std::size_t traffic = 0;
    if (schedule.kind() == ScheduleKind::Sync) {
      for (std::size_t j : order) agents[j].message_step(outbox);
      traffic += mailbox.deliver(outbox, agents, ctx);
      for (std::size_t j : order) agents[j].planning_step(outbox);
      traffic += mailbox.deliver(outbox, agents, ctx);
    } else {
      for (std::size_t j : order) {
        agents[j].message_step(outbox);
        traffic += mailbox.deliver(outbox, agents, ctx);
        agents[j].planning_step(outbox);
        traffic += mailbox.deliver(outbox, agents, ctx);
      }
    }
    std::size_t activity = 0;
    for (auto& a : agents) activity += a.take_activity();
    const bool quiet = traffic == 0 && activity == 0 &&
                       std::none_of(agents.begin(), agents.end(), [](const Agent& a) { return a.pending(); });
    if (!quiet) continue;

    const bool active = std::any_of(agents.begin(), agents.end(), [](const Agent& a) { return a.box_active(); });
    if (!active) break;
    if (result->bound_doublings >= config.max_bound_doublings)
      fail("message bounds still active after " + std::to_string(result->bound_doublings) + " doublings");
    ++result->bound_doublings;
    ctx.bound *= 2.0;
    TraceEvent e;
    e.agent = tree.root();
    e.event = "escalate";
    e.objective = ctx.bound;
    ctx.emit(std::move(e));
    for (auto& a : agents) a.force_master();
  }

  result->converged = true;
  snapshot();
  return std::move(*result);
}

}  // namespace hfmdp
