#pragma once

#include <cstddef>
#include <cstdint>

#include "hfmdp/model.hpp"

namespace hfmdp {

struct GeneratedModel {
  SubsystemTree tree;
  RelevanceWeights weights;
};

struct RandomTreeOptions {
  std::size_t min_subsystems = 2;
  std::size_t max_subsystems = 4;
  /// Upper limit on |Internal[M]|·|External[M]| assignments.
  std::size_t max_joint = std::size_t{1} << 12;
  double discount = 0.9;
  /// Probability that a child is coupled to its parent at all. Uncoupled
  /// children have an empty separator.
  double coupling = 0.8;
  /// Probability that a coupled child shares an internal variable with its
  /// parent (instead of only reading the parent's state or a shared action).
  double shared_internal = 0.25;
  /// Integer rewards in [-reward_range, reward_range].
  int reward_range = 5;
};

/// A random consistent tree of binary variables with uniform weights.
/// Deterministic in `seed`.
GeneratedModel random_tree(std::uint64_t seed, const RandomTreeOptions& options = {});

/// Chain of `length` subsystems; subsystem i has one internal and one private
/// action variable and reads its predecessor's state and shares one action
/// with it. Rewards and transitions are seeded-random.
GeneratedModel chain_model(std::size_t length, std::uint64_t seed, double discount = 0.9);

/// A root with `twins` identical child subtrees, each a two-subsystem chain
/// instantiated from the same tables.
GeneratedModel twin_subtree_model(std::size_t twins, std::uint64_t seed, double discount = 0.9);

}  // namespace hfmdp
