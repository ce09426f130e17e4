#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hfmdp/local_planner.hpp"
#include "hfmdp/model.hpp"

namespace hfmdp {

/// Canonical bytes of a subsystem that ignore variable names: domain sizes
/// and internal/external roles by scope position, then the raw reward and
/// transition tables. Equal bytes mean same class.
struct ClassSignature {
  std::string bytes;
  /// 64-bit FNV-1a of `bytes`, 16 lowercase hex digits. For display only.
  std::string digest;

  friend bool operator==(const ClassSignature& a, const ClassSignature& b) { return a.bytes == b.bytes; }
};

ClassSignature class_signature(const BasicSubsystem& subsystem);

/// Recursive signature of the subtree rooted at `j`: class, relevance
/// weights, which scope positions face the parent, and the sorted
/// signatures of the child subtrees with their attachment positions.
struct SubtreeSignature {
  std::string bytes;
  std::string digest;

  friend bool operator==(const SubtreeSignature& a, const SubtreeSignature& b) { return a.bytes == b.bytes; }
};

SubtreeSignature subtree_signature(const SubsystemTree& tree, const RelevanceWeights& weights, std::size_t j);

std::string fnv1a_hex(std::string_view bytes);

struct ReuseLedger {
  std::size_t standalone_solves_avoided = 0;
  std::size_t flow_rows_donated = 0;
  std::size_t flow_rows_rejected = 0;
  std::size_t subtree_rows_donated = 0;
};

/// Shared store behind plan reuse between equivalent subsystems and
/// subtrees. Keys are opaque byte strings built by the helpers below.
class ReuseCache {
 public:
  /// Key of a memoised stand-alone solve.
  static std::string solution_key(const ClassSignature& cls, double discount, std::span<const double> weights,
                                  std::span<const double> reward);
  /// Key under which flows of one class (at one discount and weight vector)
  /// are pooled; flows are only transferable when the weights match.
  static std::string flow_key(const ClassSignature& cls, double discount, std::span<const double> weights);

  const FlowSolution* find_solution(const std::string& key) const;
  void store_solution(const std::string& key, FlowSolution solution);

  /// Appends unless an identical flow is already pooled.
  void add_flow(const std::string& key, std::vector<double> flow);
  /// Pooled flows for `key`; agents keep their own read cursor.
  std::span<const std::vector<double>> flows(const std::string& key) const;

  void add_subtree_row(const SubtreeSignature& sig, SubtreeRow row);
  std::span<const SubtreeRow> subtree_rows(const SubtreeSignature& sig) const;

  ReuseLedger& ledger() noexcept { return ledger_; }
  const ReuseLedger& ledger() const noexcept { return ledger_; }

  std::size_t solution_count() const noexcept { return solutions_.size(); }

  /// Versioned JSON container; see docs/cache-format.md.
  void save(std::ostream& os) const;
  /// Throws InputError on a malformed file or a version mismatch.
  static ReuseCache load(std::istream& is);

  static constexpr int kFormatVersion = 1;

 private:
  std::map<std::string, FlowSolution> solutions_;
  std::map<std::string, std::vector<std::vector<double>>> flows_;
  std::map<std::string, std::vector<SubtreeRow>> subtree_rows_;
  ReuseLedger ledger_;
};

/// Flow-sharing step: re-validates each pooled flow against `recipient`
/// (conservation residual at most `residual_tolerance`) and records the
/// accepted ones in `bank`. Returns the number of rows added.
std::size_t share_flows(ReuseCache& cache, const std::string& key, std::size_t& cursor,
                        const BasicSubsystem& recipient, double discount, std::span<const double> weights,
                        LocalPolicyBank& bank, double residual_tolerance = 1e-8);

/// Subtree-row sharing between equivalent subtrees. Throws InputError when
/// the signatures differ.
std::vector<SubtreeRow> share_subtree_rows(const ReuseCache& cache, const SubtreeSignature& donor,
                                           const SubtreeSignature& recipient, std::size_t& cursor);

}  // namespace hfmdp
