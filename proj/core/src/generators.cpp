#include "hfmdp/generators.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>

#include "hfmdp/errors.hpp"

namespace hfmdp {

namespace {

/// Draws that do not depend on the standard library's distribution
/// implementations, so generated models are identical everywhere.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  double reward(int range) { return static_cast<double>(static_cast<int>(below(2 * range + 1)) - range); }

 private:
  std::mt19937_64 rng_;
};

/// Per-variable next-step factor: a table over the assignments of its
/// parents (a scope) giving P(v′ = 1).
struct Factor {
  Scope parents;
  std::vector<double> p_one;
};

/// Builds the CPT of a subsystem whose internal variables evolve
/// independently given the scope, each by its own factor.
std::vector<double> product_cpt(const Scope& scope, const Scope& internal, const std::map<VarId, Factor>& factors) {
  const std::size_t nz = scope.assignment_count(), nx = internal.assignment_count();
  std::vector<std::vector<std::size_t>> proj;
  for (VarId v : internal.vars()) proj.push_back(projection(scope, factors.at(v).parents));
  std::vector<double> cpt(nz * nx);
  for (std::size_t z = 0; z < nz; ++z) {
    std::size_t x = 0;
    for (AssignmentCursor c(internal); !c.done(); c.next(), ++x) {
      double p = 1.0;
      for (std::size_t i = 0; i < internal.size(); ++i) {
        const double one = factors.at(internal.var(i)).p_one[proj[i][z]];
        p *= c.values()[i] == 1 ? one : 1.0 - one;
      }
      cpt[z * nx + x] = p;
    }
  }
  return cpt;
}

Factor random_factor(Draw& d, const Scope& parents, bool strictly_mixed) {
  Factor f{parents, {}};
  const bool deterministic = !strictly_mixed && d.chance(0.3);
  for (std::size_t i = 0; i < parents.assignment_count(); ++i) {
    if (deterministic) f.p_one.push_back(d.chance(0.5) ? 1.0 : 0.0);
    else if (strictly_mixed) f.p_one.push_back(0.1 + 0.8 * d.unit());
    else f.p_one.push_back(d.unit());
  }
  return f;
}

struct Plan {
  std::vector<std::set<std::string>> internal, external;
  std::vector<std::optional<std::size_t>> parent;
  // Shared internal variable name -> the two subsystems sharing it.
  std::map<std::string, std::pair<std::size_t, std::size_t>> shared;
};

}  // namespace

GeneratedModel random_tree(std::uint64_t seed, const RandomTreeOptions& opt) {
  if (opt.min_subsystems < 1 || opt.max_subsystems < opt.min_subsystems)
    throw InputError("invalid subsystem count range");
  Draw d(seed);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const std::size_t n = opt.min_subsystems + d.below(opt.max_subsystems - opt.min_subsystems + 1);
    Plan plan;
    plan.internal.resize(n);
    plan.external.resize(n);
    plan.parent.resize(n);
    std::vector<std::string> order;  // declaration order
    auto declare = [&](const std::string& name) { order.push_back(name); };
    for (std::size_t j = 0; j < n; ++j) {
      declare("x" + std::to_string(j));
      declare("a" + std::to_string(j));
      plan.internal[j].insert("x" + std::to_string(j));
      plan.external[j].insert("a" + std::to_string(j));
      if (j > 0) plan.parent[j] = d.below(j);
    }
    for (std::size_t k = 1; k < n; ++k) {
      const std::size_t j = *plan.parent[k];
      if (!d.chance(opt.coupling)) continue;
      if (d.chance(opt.shared_internal)) {
        const std::string w = "w" + std::to_string(k);
        declare(w);
        plan.internal[j].insert(w);
        plan.internal[k].insert(w);
        plan.shared[w] = {j, k};
        continue;
      }
      const std::size_t kind = d.below(3);
      if (kind == 0 || d.chance(0.3)) plan.external[k].insert("x" + std::to_string(j));
      if (kind == 1) plan.external[j].insert("x" + std::to_string(k));
      if (kind == 2 || d.chance(0.3)) {
        const std::string b = "b" + std::to_string(k);
        declare(b);
        plan.external[j].insert(b);
        plan.external[k].insert(b);
      }
    }

    auto vars = std::make_shared<VariableSet>();
    for (const auto& name : order) vars->add(name, {"0", "1"});
    std::vector<Scope> internal(n), external(n), scope(n);
    std::set<std::string> all_internal;
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<std::string_view> in(plan.internal[j].begin(), plan.internal[j].end());
      all_internal.insert(plan.internal[j].begin(), plan.internal[j].end());
      std::vector<VarId> ids;
      for (auto s : in) ids.push_back(vars->id(s));
      internal[j] = vars->scope(ids);
    }
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<VarId> ids;
      for (const auto& s : plan.external[j]) ids.push_back(vars->id(s));
      external[j] = vars->scope(ids);
      scope[j] = internal[j].unite(external[j]);
    }
    std::size_t state_bits = all_internal.size(), action_bits = 0;
    for (const auto& name : order)
      if (!all_internal.count(name)) {
        bool used = false;
        for (std::size_t j = 0; j < n; ++j) used |= plan.external[j].count(name) > 0;
        action_bits += used ? 1 : 0;
      }
    if ((std::size_t{1} << (state_bits + action_bits)) > opt.max_joint) continue;

    // Factors: private internals depend on the owner's whole scope; shared
    // internals only on what both owners see.
    std::map<VarId, Factor> factors;
    for (std::size_t j = 0; j < n; ++j) {
      const VarId x = vars->id("x" + std::to_string(j));
      factors[x] = random_factor(d, scope[j], false);
    }
    for (const auto& [w, owners] : plan.shared) {
      const Scope common = scope[owners.first].intersect(scope[owners.second]);
      factors[vars->id(w)] = random_factor(d, common, true);
    }

    std::vector<BasicSubsystem> subs;
    for (std::size_t j = 0; j < n; ++j) {
      BasicSubsystem s;
      s.name = "M" + std::to_string(j);
      s.internal = internal[j];
      s.external = external[j].minus(internal[j]);
      for (std::size_t z = 0; z < scope[j].assignment_count(); ++z) s.reward.push_back(d.reward(opt.reward_range));
      s.transition = product_cpt(scope[j], internal[j], factors);
      subs.push_back(std::move(s));
    }
    SubsystemTree tree(vars, std::move(subs), plan.parent, opt.discount);
    RelevanceWeights w = RelevanceWeights::uniform(tree);
    return GeneratedModel{std::move(tree), std::move(w)};
  }
  throw InputError("could not generate a tree within the joint-size limit");
}

GeneratedModel chain_model(std::size_t length, std::uint64_t seed, double discount) {
  if (length < 1) throw InputError("chain length must be at least 1");
  Draw d(seed);
  auto vars = std::make_shared<VariableSet>();
  for (std::size_t i = 0; i < length; ++i) {
    vars->add("x" + std::to_string(i), {"0", "1"});
    vars->add("a" + std::to_string(i), {"0", "1"});
    if (i > 0) vars->add("b" + std::to_string(i), {"0", "1"});
  }
  std::vector<BasicSubsystem> subs;
  std::vector<std::optional<std::size_t>> parents;
  for (std::size_t i = 0; i < length; ++i) {
    std::vector<std::string_view> ext;
    const std::string a = "a" + std::to_string(i), prev = i > 0 ? "x" + std::to_string(i - 1) : "",
                      b = "b" + std::to_string(i), next_b = "b" + std::to_string(i + 1);
    ext.push_back(a);
    if (i > 0) {
      ext.push_back(prev);
      ext.push_back(b);
    }
    if (i + 1 < length) ext.push_back(next_b);
    BasicSubsystem s;
    s.name = "C" + std::to_string(i);
    s.internal = vars->scope({std::string_view("x" + std::to_string(i))});
    std::vector<VarId> ids;
    for (auto e : ext) ids.push_back(vars->id(e));
    s.external = vars->scope(ids);
    const Scope scope = s.scope();
    for (std::size_t z = 0; z < scope.assignment_count(); ++z) s.reward.push_back(d.reward(5));
    std::map<VarId, Factor> f{{s.internal.var(0), random_factor(d, scope, false)}};
    s.transition = product_cpt(scope, s.internal, f);
    subs.push_back(std::move(s));
    parents.push_back(i == 0 ? std::nullopt : std::optional<std::size_t>(i - 1));
  }
  SubsystemTree tree(vars, std::move(subs), parents, discount);
  RelevanceWeights w = RelevanceWeights::uniform(tree);
  return GeneratedModel{std::move(tree), std::move(w)};
}

GeneratedModel twin_subtree_model(std::size_t twins, std::uint64_t seed, double discount) {
  if (twins < 1) throw InputError("at least one twin subtree is required");
  Draw d(seed);
  auto vars = std::make_shared<VariableSet>();
  vars->add("r", {"0", "1"});
  vars->add("c", {"0", "1"});
  for (std::size_t t = 0; t < twins; ++t) {
    const std::string s = std::to_string(t);
    vars->add("p" + s, {"0", "1"});
    vars->add("q" + s, {"0", "1"});
    vars->add("u" + s, {"0", "1"});
    vars->add("v" + s, {"0", "1"});
  }

  BasicSubsystem root;
  root.name = "R";
  root.internal = vars->scope({"r"});
  root.external = vars->scope({"c"});
  for (std::size_t z = 0; z < 4; ++z) root.reward.push_back(d.reward(5));
  root.transition = product_cpt(root.scope(), root.internal, {{vars->id("r"), random_factor(d, root.scope(), false)}});

  // Class tables shared by every twin; scope positions line up because each
  // twin's variables are declared in the same relative order.
  std::vector<double> upper_reward, lower_reward;
  for (std::size_t z = 0; z < 8; ++z) upper_reward.push_back(d.reward(5));
  for (std::size_t z = 0; z < 8; ++z) lower_reward.push_back(d.reward(5));
  const Factor upper_f = random_factor(d, vars->scope({"r", "p0", "q0"}), false);
  const Factor lower_f = random_factor(d, vars->scope({"p0", "u0", "v0"}), false);

  std::vector<BasicSubsystem> subs{root};
  std::vector<std::optional<std::size_t>> parents{std::nullopt};
  for (std::size_t t = 0; t < twins; ++t) {
    const std::string s = std::to_string(t);
    BasicSubsystem up;
    up.name = "A" + s;
    up.class_name = "Upper";
    up.internal = vars->scope({std::string_view("p" + s)});
    up.external = vars->scope({std::string_view("r"), std::string_view("q" + s)});
    up.reward = upper_reward;
    up.transition = product_cpt(up.scope(), up.internal, {{up.internal.var(0), Factor{up.scope(), upper_f.p_one}}});
    BasicSubsystem low;
    low.name = "B" + s;
    low.class_name = "Lower";
    low.internal = vars->scope({std::string_view("u" + s)});
    low.external = vars->scope({std::string_view("p" + s), std::string_view("v" + s)});
    low.reward = lower_reward;
    low.transition = product_cpt(low.scope(), low.internal, {{low.internal.var(0), Factor{low.scope(), lower_f.p_one}}});
    parents.push_back(0);
    subs.push_back(std::move(up));
    parents.push_back(subs.size() - 1);
    subs.push_back(std::move(low));
  }
  SubsystemTree tree(vars, std::move(subs), parents, discount);
  RelevanceWeights w = RelevanceWeights::ones(tree);
  return GeneratedModel{std::move(tree), std::move(w)};
}

}  // namespace hfmdp
