#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hfmdp/errors.hpp"

namespace hfmdp {

/// Index of a variable in its VariableSet; also its declaration rank.
using VarId = std::uint32_t;

struct VariableDecl {
  std::string name;
  std::vector<std::string> domain;

  std::size_t cardinality() const noexcept { return domain.size(); }
};

class Scope;

/// Registry of declared variables. Declaration order is the global variable
/// order used by every Scope and therefore by every table layout.
class VariableSet {
 public:
  VarId add(std::string name, std::vector<std::string> domain);

  std::size_t size() const noexcept { return decls_.size(); }
  const VariableDecl& operator[](VarId id) const { return decls_.at(id); }
  std::optional<VarId> find(std::string_view name) const;
  /// Throws InputError for unknown names.
  VarId id(std::string_view name) const;
  std::optional<std::uint32_t> value_index(VarId id, std::string_view label) const;

  Scope scope(std::span<const VarId> ids) const;
  Scope scope(std::initializer_list<std::string_view> names) const;

 private:
  std::vector<VariableDecl> decls_;
  std::unordered_map<std::string, VarId> by_name_;
};

/// Ordered set of variables with their domain sizes. Entries are kept sorted
/// by VarId, which makes scope algebra and enumeration order canonical.
class Scope {
 public:
  Scope() = default;
  /// Builds a scope from (id, cardinality) pairs; order of the input is
  /// irrelevant. Duplicate ids with equal cardinality collapse.
  Scope(std::vector<VarId> ids, std::vector<std::uint32_t> cards);

  std::size_t size() const noexcept { return vars_.size(); }
  bool empty() const noexcept { return vars_.empty(); }
  std::span<const VarId> vars() const noexcept { return vars_; }
  std::span<const std::uint32_t> cards() const noexcept { return cards_; }
  VarId var(std::size_t pos) const { return vars_.at(pos); }
  std::uint32_t card(std::size_t pos) const { return cards_.at(pos); }

  bool contains(VarId id) const noexcept;
  std::optional<std::size_t> position(VarId id) const noexcept;
  bool subset_of(const Scope& other) const noexcept;
  /// Number of joint assignments; 1 for the empty scope.
  std::size_t assignment_count() const noexcept;

  Scope unite(const Scope& other) const;
  Scope intersect(const Scope& other) const;
  Scope minus(const Scope& other) const;

  friend bool operator==(const Scope&, const Scope&) = default;

 private:
  std::vector<VarId> vars_;
  std::vector<std::uint32_t> cards_;
};

/// Value indices (into each variable's domain) for every variable of a scope.
struct Assignment {
  Scope scope;
  std::vector<std::uint32_t> values;

  std::uint32_t value_of(VarId id) const;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// All assignments of `scope`, last variable varying fastest.
std::vector<Assignment> enumerate_assignments(const Scope& scope);
/// Position of `a` in enumerate_assignments(a.scope).
std::size_t assignment_index(const Assignment& a);
Assignment assignment_at(const Scope& scope, std::size_t index);
/// Copies the values of `target`'s variables out of `a`. Throws ScopeError
/// when target is not a subset of a.scope.
Assignment restrict(const Assignment& a, const Scope& target);

/// For every assignment index of `from`, the index of its restriction to
/// `to` (which must be a subset of `from`).
std::vector<std::size_t> projection(const Scope& from, const Scope& to);

/// Mixed-radix odometer over a scope; the hot-loop counterpart of
/// enumerate_assignments.
class AssignmentCursor {
 public:
  explicit AssignmentCursor(const Scope& scope);
  const std::vector<std::uint32_t>& values() const noexcept { return values_; }
  std::size_t index() const noexcept { return index_; }
  bool done() const noexcept { return done_; }
  void next();

 private:
  std::vector<std::uint32_t> cards_;
  std::vector<std::uint32_t> values_;
  std::size_t index_ = 0;
  bool done_ = false;
};

/// A local MDP fragment: dynamics of `internal` given the whole scope, and a
/// reward over the scope. Tables use canonical assignment order.
struct BasicSubsystem {
  std::string name;
  Scope internal;
  Scope external;
  /// One entry per assignment of scope().
  std::vector<double> reward;
  /// Row per assignment of scope(), column per next-step internal assignment.
  std::vector<double> transition;
  /// Name of the class this subsystem was instantiated from, if any.
  std::string class_name;

  Scope scope() const { return internal.unite(external); }
  std::size_t scope_size() const { return scope().assignment_count(); }
  std::size_t internal_size() const { return internal.assignment_count(); }
  double probability(std::size_t scope_index, std::size_t next_internal) const {
    return transition[scope_index * internal_size() + next_internal];
  }

  /// Shape and finiteness checks. Row normalisation is a validation concern.
  void check_shape() const;
};

/// Basic subsystems arranged in a tree. Immutable after construction.
class SubsystemTree {
 public:
  SubsystemTree(std::shared_ptr<const VariableSet> variables,
                std::vector<BasicSubsystem> subsystems,
                std::vector<std::optional<std::size_t>> parents, double discount);

  std::size_t size() const noexcept { return subsystems_.size(); }
  const BasicSubsystem& subsystem(std::size_t j) const { return subsystems_.at(j); }
  const std::vector<BasicSubsystem>& subsystems() const noexcept { return subsystems_; }
  std::optional<std::size_t> parent(std::size_t j) const { return parents_.at(j); }
  const std::vector<std::size_t>& children(std::size_t j) const { return children_.at(j); }
  bool is_leaf(std::size_t j) const { return children_.at(j).empty(); }
  std::size_t root() const noexcept { return root_; }
  double discount() const noexcept { return discount_; }
  const VariableSet& variables() const noexcept { return *variables_; }
  std::shared_ptr<const VariableSet> variables_ptr() const noexcept { return variables_; }

  /// Scope[M_j] ∩ Scope[Parent[M_j]]; the empty scope for the root.
  const Scope& sepset(std::size_t j) const { return sepsets_.at(j); }
  const Scope& scope(std::size_t j) const { return scopes_.at(j); }
  /// Variables internal to at least one subsystem.
  const Scope& internal_vars() const noexcept { return internal_; }
  /// Variables in some scope but internal to none.
  const Scope& external_vars() const noexcept { return external_; }

  std::vector<std::size_t> preorder() const;
  std::vector<std::size_t> postorder() const;
  std::size_t depth(std::size_t j) const;
  /// Nodes on the tree path from j to k, both ends included.
  std::vector<std::size_t> path(std::size_t j, std::size_t k) const;
  std::optional<std::size_t> index_of(std::string_view name) const;

 private:
  std::shared_ptr<const VariableSet> variables_;
  std::vector<BasicSubsystem> subsystems_;
  std::vector<std::optional<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<Scope> scopes_;
  std::vector<Scope> sepsets_;
  Scope internal_;
  Scope external_;
  std::size_t root_ = 0;
  double discount_ = 0.0;
};

/// A leaf wrapping a basic subsystem, or a named group of members joined by
/// parent edges with one designated root member.
struct HierarchicalNode {
  struct Edge {
    std::string child;
    std::string parent;
  };

  std::string name;
  std::optional<BasicSubsystem> leaf;
  std::vector<HierarchicalNode> members;
  std::vector<Edge> edges;
  std::string root;

  static HierarchicalNode basic(BasicSubsystem s);
  static HierarchicalNode group(std::string name, std::vector<HierarchicalNode> members,
                                std::vector<Edge> edges, std::string root);

  bool is_leaf() const noexcept { return leaf.has_value(); }
  /// Name of the basic subsystem a tree-parent edge attaches to.
  const std::string& attachment_name() const;
};

/// Depth-first expansion of a hierarchy into a flat tree (root at index 0).
SubsystemTree flatten(const HierarchicalNode& hierarchy,
                      std::shared_ptr<const VariableSet> variables, double discount);

/// Per-subsystem state relevance weights over Internal[M_j] assignments.
struct RelevanceWeights {
  std::vector<std::vector<double>> per_subsystem;

  /// All-ones weights: the objective is the unweighted sum of local values.
  static RelevanceWeights ones(const SubsystemTree& tree);
  /// Uniform probability over each subsystem's internal assignments.
  static RelevanceWeights uniform(const SubsystemTree& tree);

  const std::vector<double>& operator[](std::size_t j) const { return per_subsystem.at(j); }
  std::size_t size() const noexcept { return per_subsystem.size(); }
};

}  // namespace hfmdp
