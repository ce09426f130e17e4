#include "hfmdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>
#include <unordered_set>

namespace hfmdp {

// ---------------------------------------------------------------------------
// VariableSet

VarId VariableSet::add(std::string name, std::vector<std::string> domain) {
  if (name.empty()) throw InputError("variable name must not be empty");
  if (domain.empty()) throw InputError("variable '" + name + "' has an empty domain");
  std::unordered_set<std::string> seen;
  for (const auto& v : domain) {
    if (!seen.insert(v).second)
      throw InputError("variable '" + name + "' repeats domain value '" + v + "'");
  }
  if (by_name_.count(name)) throw InputError("variable '" + name + "' declared twice");
  const auto id = static_cast<VarId>(decls_.size());
  by_name_.emplace(name, id);
  decls_.push_back(VariableDecl{std::move(name), std::move(domain)});
  return id;
}

std::optional<VarId> VariableSet::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

VarId VariableSet::id(std::string_view name) const {
  if (auto found = find(name)) return *found;
  throw InputError("unknown variable '" + std::string(name) + "'");
}

std::optional<std::uint32_t> VariableSet::value_index(VarId id, std::string_view label) const {
  const auto& dom = decls_.at(id).domain;
  for (std::size_t i = 0; i < dom.size(); ++i) {
    if (dom[i] == label) return static_cast<std::uint32_t>(i);
  }
  return std::nullopt;
}

Scope VariableSet::scope(std::span<const VarId> ids) const {
  std::vector<VarId> vs(ids.begin(), ids.end());
  std::vector<std::uint32_t> cards;
  cards.reserve(vs.size());
  for (VarId v : vs) cards.push_back(static_cast<std::uint32_t>(decls_.at(v).cardinality()));
  return Scope(std::move(vs), std::move(cards));
}

Scope VariableSet::scope(std::initializer_list<std::string_view> names) const {
  std::vector<VarId> ids;
  for (auto n : names) ids.push_back(id(n));
  return scope(ids);
}

// ---------------------------------------------------------------------------
// Scope

Scope::Scope(std::vector<VarId> ids, std::vector<std::uint32_t> cards) {
  if (ids.size() != cards.size()) throw InputError("scope ids/cardinalities length mismatch");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  for (std::size_t k : order) {
    if (cards[k] == 0) throw InputError("scope variable with empty domain");
    if (!vars_.empty() && vars_.back() == ids[k]) {
      if (cards_.back() != cards[k]) throw InputError("scope variable with conflicting cardinality");
      continue;
    }
    vars_.push_back(ids[k]);
    cards_.push_back(cards[k]);
  }
}

bool Scope::contains(VarId id) const noexcept { return position(id).has_value(); }

std::optional<std::size_t> Scope::position(VarId id) const noexcept {
  auto it = std::lower_bound(vars_.begin(), vars_.end(), id);
  if (it == vars_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - vars_.begin());
}

bool Scope::subset_of(const Scope& other) const noexcept {
  return std::includes(other.vars_.begin(), other.vars_.end(), vars_.begin(), vars_.end());
}

std::size_t Scope::assignment_count() const noexcept {
  std::size_t n = 1;
  for (auto c : cards_) n *= c;
  return n;
}

Scope Scope::unite(const Scope& other) const {
  std::vector<VarId> ids(vars_);
  std::vector<std::uint32_t> cs(cards_);
  ids.insert(ids.end(), other.vars_.begin(), other.vars_.end());
  cs.insert(cs.end(), other.cards_.begin(), other.cards_.end());
  return Scope(std::move(ids), std::move(cs));
}

Scope Scope::intersect(const Scope& other) const {
  std::vector<VarId> ids;
  std::vector<std::uint32_t> cs;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (other.contains(vars_[i])) {
      ids.push_back(vars_[i]);
      cs.push_back(cards_[i]);
    }
  }
  return Scope(std::move(ids), std::move(cs));
}

Scope Scope::minus(const Scope& other) const {
  std::vector<VarId> ids;
  std::vector<std::uint32_t> cs;
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (!other.contains(vars_[i])) {
      ids.push_back(vars_[i]);
      cs.push_back(cards_[i]);
    }
  }
  return Scope(std::move(ids), std::move(cs));
}

// ---------------------------------------------------------------------------
// Assignments

std::uint32_t Assignment::value_of(VarId id) const {
  auto pos = scope.position(id);
  if (!pos) throw ScopeError("variable " + std::to_string(id) + " not in assignment scope");
  return values[*pos];
}

std::vector<Assignment> enumerate_assignments(const Scope& scope) {
  std::vector<Assignment> out;
  out.reserve(scope.assignment_count());
  for (AssignmentCursor c(scope); !c.done(); c.next()) out.push_back(Assignment{scope, c.values()});
  return out;
}

std::size_t assignment_index(const Assignment& a) {
  if (a.values.size() != a.scope.size()) throw ScopeError("assignment arity does not match scope");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values[i] >= a.scope.card(i)) throw ScopeError("assignment value outside domain");
    idx = idx * a.scope.card(i) + a.values[i];
  }
  return idx;
}

Assignment assignment_at(const Scope& scope, std::size_t index) {
  if (index >= scope.assignment_count()) throw ScopeError("assignment index out of range");
  Assignment a{scope, std::vector<std::uint32_t>(scope.size())};
  for (std::size_t i = scope.size(); i-- > 0;) {
    a.values[i] = static_cast<std::uint32_t>(index % scope.card(i));
    index /= scope.card(i);
  }
  return a;
}

Assignment restrict(const Assignment& a, const Scope& target) {
  if (!target.subset_of(a.scope)) throw ScopeError("restriction target is not a subset of the assignment scope");
  Assignment out{target, std::vector<std::uint32_t>(target.size())};
  for (std::size_t i = 0; i < target.size(); ++i) out.values[i] = a.value_of(target.var(i));
  return out;
}

std::vector<std::size_t> projection(const Scope& from, const Scope& to) {
  if (!to.subset_of(from)) throw ScopeError("projection target is not a subset of the source scope");
  // Stride of each `from` position inside the `to` index; 0 when absent.
  std::vector<std::size_t> stride(from.size(), 0);
  std::size_t s = 1;
  for (std::size_t i = to.size(); i-- > 0;) {
    stride[*from.position(to.var(i))] = s;
    s *= to.card(i);
  }
  std::vector<std::size_t> out;
  out.reserve(from.assignment_count());
  for (AssignmentCursor c(from); !c.done(); c.next()) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < from.size(); ++i) idx += c.values()[i] * stride[i];
    out.push_back(idx);
  }
  return out;
}

AssignmentCursor::AssignmentCursor(const Scope& scope)
    : cards_(scope.cards().begin(), scope.cards().end()), values_(scope.size(), 0) {}

void AssignmentCursor::next() {
  ++index_;
  for (std::size_t i = values_.size(); i-- > 0;) {
    if (++values_[i] < cards_[i]) return;
    values_[i] = 0;
  }
  done_ = true;
}

// ---------------------------------------------------------------------------
// BasicSubsystem

void BasicSubsystem::check_shape() const {
  if (!internal.intersect(external).empty())
    throw InputError("subsystem '" + name + "': internal and external variables overlap");
  const std::size_t n = scope_size();
  if (reward.size() != n)
    throw InputError("subsystem '" + name + "': reward table has " + std::to_string(reward.size()) +
                     " entries, expected " + std::to_string(n));
  if (transition.size() != n * internal_size())
    throw InputError("subsystem '" + name + "': transition table has " +
                     std::to_string(transition.size()) + " entries, expected " +
                     std::to_string(n * internal_size()));
  for (double r : reward)
    if (!std::isfinite(r)) throw InputError("subsystem '" + name + "': non-finite reward");
  for (double p : transition)
    if (!std::isfinite(p)) throw InputError("subsystem '" + name + "': non-finite probability");
}

// ---------------------------------------------------------------------------
// SubsystemTree

SubsystemTree::SubsystemTree(std::shared_ptr<const VariableSet> variables,
                             std::vector<BasicSubsystem> subsystems,
                             std::vector<std::optional<std::size_t>> parents, double discount)
    : variables_(std::move(variables)),
      subsystems_(std::move(subsystems)),
      parents_(std::move(parents)),
      discount_(discount) {
  if (!variables_) throw InputError("subsystem tree needs a variable set");
  const std::size_t m = subsystems_.size();
  if (m == 0) throw StructureError("subsystem tree has no subsystems");
  if (parents_.size() != m) throw StructureError("parent map size does not match subsystem count");
  if (!(discount_ >= 0.0 && discount_ < 1.0)) throw InputError("discount must lie in [0, 1)");

  std::optional<std::size_t> root;
  children_.assign(m, {});
  for (std::size_t j = 0; j < m; ++j) {
    if (!parents_[j]) {
      if (root) throw StructureError("subsystem tree has more than one root");
      root = j;
      continue;
    }
    if (*parents_[j] >= m) throw StructureError("dangling parent index for '" + subsystems_[j].name + "'");
    if (*parents_[j] == j) throw StructureError("subsystem '" + subsystems_[j].name + "' is its own parent");
    children_[*parents_[j]].push_back(j);
  }
  if (!root) throw StructureError("subsystem tree has no root");
  root_ = *root;
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t steps = 0;
    for (auto cur = parents_[j]; cur; cur = parents_[*cur]) {
      if (++steps > m) throw StructureError("parent map contains a cycle");
    }
  }

  std::unordered_set<std::string> names;
  for (const auto& s : subsystems_) {
    if (!names.insert(s.name).second) throw StructureError("duplicate subsystem name '" + s.name + "'");
    s.check_shape();
    for (const Scope* sc : {&s.internal, &s.external}) {
      for (std::size_t i = 0; i < sc->size(); ++i) {
        if (sc->var(i) >= variables_->size() ||
            (*variables_)[sc->var(i)].cardinality() != sc->card(i))
          throw InputError("subsystem '" + s.name + "' references an undeclared variable");
      }
    }
  }

  scopes_.reserve(m);
  for (const auto& s : subsystems_) {
    scopes_.push_back(s.scope());
    internal_ = internal_.unite(s.internal);
  }
  Scope all;
  for (const auto& sc : scopes_) all = all.unite(sc);
  external_ = all.minus(internal_);
  sepsets_.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    if (parents_[j]) sepsets_[j] = scopes_[j].intersect(scopes_[*parents_[j]]);
  }
}

std::vector<std::size_t> SubsystemTree::preorder() const {
  std::vector<std::size_t> out;
  std::vector<std::size_t> stack{root_};
  while (!stack.empty()) {
    auto j = stack.back();
    stack.pop_back();
    out.push_back(j);
    const auto& ch = children_[j];
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return out;
}

std::vector<std::size_t> SubsystemTree::postorder() const {
  std::vector<std::size_t> out;
  std::function<void(std::size_t)> visit = [&](std::size_t j) {
    for (auto k : children_[j]) visit(k);
    out.push_back(j);
  };
  visit(root_);
  return out;
}

std::size_t SubsystemTree::depth(std::size_t j) const {
  std::size_t d = 0;
  for (auto cur = parents_.at(j); cur; cur = parents_[*cur]) ++d;
  return d;
}

std::vector<std::size_t> SubsystemTree::path(std::size_t j, std::size_t k) const {
  std::vector<std::size_t> up_j{j}, up_k{k};
  for (auto c = parents_.at(j); c; c = parents_[*c]) up_j.push_back(*c);
  for (auto c = parents_.at(k); c; c = parents_[*c]) up_k.push_back(*c);
  // Strip the shared ancestry, keeping the lowest common ancestor once.
  while (up_j.size() >= 2 && up_k.size() >= 2 && up_j[up_j.size() - 2] == up_k[up_k.size() - 2]) {
    up_j.pop_back();
    up_k.pop_back();
  }
  std::vector<std::size_t> out(up_j.begin(), up_j.end());
  for (std::size_t i = up_k.size() - 1; i-- > 0;) out.push_back(up_k[i]);
  return out;
}

std::optional<std::size_t> SubsystemTree::index_of(std::string_view name) const {
  for (std::size_t j = 0; j < subsystems_.size(); ++j)
    if (subsystems_[j].name == name) return j;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Hierarchies

HierarchicalNode HierarchicalNode::basic(BasicSubsystem s) {
  HierarchicalNode n;
  n.name = s.name;
  n.leaf = std::move(s);
  return n;
}

HierarchicalNode HierarchicalNode::group(std::string name, std::vector<HierarchicalNode> members,
                                         std::vector<Edge> edges, std::string root) {
  HierarchicalNode n;
  n.name = std::move(name);
  n.members = std::move(members);
  n.edges = std::move(edges);
  n.root = std::move(root);
  return n;
}

namespace {

std::string describe_group(const std::string& name) {
  return name.empty() ? std::string("the top-level group") : "group '" + name + "'";
}

}  // namespace

const std::string& HierarchicalNode::attachment_name() const {
  if (leaf) return leaf->name;
  for (const auto& m : members)
    if (m.name == root) return m.attachment_name();
  throw StructureError(describe_group(name) + " has no member named '" + root + "'");
}

namespace {

struct FlatBuilder {
  std::vector<BasicSubsystem> subs;
  std::vector<std::optional<std::size_t>> parents;

  std::size_t expand(const HierarchicalNode& node, std::optional<std::size_t> parent,
                     std::size_t depth) {
    if (depth > 256) throw StructureError("hierarchy nesting too deep (cycle?)");
    if (node.leaf) {
      subs.push_back(*node.leaf);
      parents.push_back(parent);
      return subs.size() - 1;
    }
    if (node.members.empty()) throw StructureError(describe_group(node.name) + " has no members");
    std::unordered_map<std::string, const HierarchicalNode*> by_name;
    for (const auto& m : node.members) {
      if (!by_name.emplace(m.name, &m).second)
        throw StructureError(describe_group(node.name) + " has duplicate member '" + m.name + "'");
    }
    if (!by_name.count(node.root))
      throw StructureError(describe_group(node.name) + " names unknown root '" + node.root + "'");
    std::unordered_map<std::string, std::string> parent_of;
    for (const auto& e : node.edges) {
      if (!by_name.count(e.child) || !by_name.count(e.parent))
        throw StructureError(describe_group(node.name) + ": dangling edge " + e.child + " -> " + e.parent);
      if (e.child == node.root)
        throw StructureError(describe_group(node.name) + ": root member '" + e.child + "' has a parent");
      if (!parent_of.emplace(e.child, e.parent).second)
        throw StructureError(describe_group(node.name) + ": member '" + e.child + "' has two parents");
    }
    std::size_t visited = 0;
    std::function<void(const std::string&, std::optional<std::size_t>)> visit =
        [&](const std::string& member, std::optional<std::size_t> attach_parent) {
          if (++visited > node.members.size())
            throw StructureError(describe_group(node.name) + " contains a cycle");
          const std::size_t at = expand(*by_name.at(member), attach_parent, depth + 1);
          for (const auto& e : node.edges)
            if (e.parent == member) visit(e.child, at);
        };
    const std::size_t before = subs.size();
    visit(node.root, parent);
    if (visited != node.members.size())
      throw StructureError(describe_group(node.name) + " has members unreachable from its root (cycle or dangling parent)");
    return before;
  }
};

}  // namespace

SubsystemTree flatten(const HierarchicalNode& hierarchy,
                      std::shared_ptr<const VariableSet> variables, double discount) {
  FlatBuilder b;
  b.expand(hierarchy, std::nullopt, 0);
  return SubsystemTree(std::move(variables), std::move(b.subs), std::move(b.parents), discount);
}

// ---------------------------------------------------------------------------
// Weights

RelevanceWeights RelevanceWeights::ones(const SubsystemTree& tree) {
  RelevanceWeights w;
  for (const auto& s : tree.subsystems()) w.per_subsystem.emplace_back(s.internal_size(), 1.0);
  return w;
}

RelevanceWeights RelevanceWeights::uniform(const SubsystemTree& tree) {
  RelevanceWeights w;
  for (const auto& s : tree.subsystems()) {
    const auto n = s.internal_size();
    w.per_subsystem.emplace_back(n, 1.0 / static_cast<double>(n));
  }
  return w;
}

}  // namespace hfmdp
