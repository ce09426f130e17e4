#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hfmdp/model.hpp"

namespace hfmdp {

inline constexpr int kModelFormatVersion = 1;

/// Relevance weights as written in a model file: a default rule plus
/// explicit vectors keyed by subsystem name.
struct WeightsSection {
  enum class Default { Ones, Uniform };
  Default base = Default::Ones;
  std::vector<std::pair<std::string, std::vector<double>>> explicit_vectors;
};

/// Everything a model file says, before flattening.
struct ModelDocument {
  std::shared_ptr<VariableSet> variables;
  HierarchicalNode hierarchy;
  double discount = 0.0;
  WeightsSection weights;
};

/// A model ready for planning.
struct LoadedModel {
  SubsystemTree tree;
  RelevanceWeights weights;
};

/// Parses the text format described in docs/model-format.md. Every error is
/// a ParseError carrying the 1-based line and column of the offending token.
ModelDocument parse_model(std::string_view text);
/// Reads and parses a file; unreadable files raise ParseError at 0:0.
ModelDocument parse_model_file(const std::filesystem::path& path);

/// Canonical text: every subsystem written out densely (class instances
/// expanded), groups before the tree block, numbers in shortest round-trip
/// form. Parsing the output and serialising again yields the same text.
std::string serialize_model(const ModelDocument& doc);

/// Flattens the hierarchy and resolves the weights against it. Structural
/// errors become ParseErrors located at the tree block.
LoadedModel instantiate(const ModelDocument& doc);
LoadedModel load_model(const std::filesystem::path& path);

/// Wraps an already flat tree as a document with explicit weights, so that
/// generated models can be written to disk.
ModelDocument document_from_tree(const SubsystemTree& tree, const RelevanceWeights& weights);

/// Shortest decimal text that reads back as exactly `v`.
std::string format_real(double v);

}  // namespace hfmdp
