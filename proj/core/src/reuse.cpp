#include "hfmdp/reuse.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "hfmdp/errors.hpp"

namespace hfmdp {

namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_double(std::string& out, double d) {
  // Collapse -0.0 so that tables equal under == also sign-equal here.
  if (d == 0.0) d = 0.0;
  put_u64(out, std::bit_cast<std::uint64_t>(d));
}

void put_doubles(std::string& out, std::span<const double> v) {
  put_u64(out, v.size());
  for (double d : v) put_double(out, d);
}

std::string position_mask(const Scope& scope, const Scope& subset) {
  std::string mask(scope.size(), '0');
  for (std::size_t i = 0; i < scope.size(); ++i)
    if (subset.contains(scope.var(i))) mask[i] = '1';
  return mask;
}

std::string to_hex(std::string_view bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xf]);
  }
  return out;
}

std::string from_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw InputError("cache key has odd length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw InputError("cache key is not lowercase hex");
  };
  std::string out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2)
    out.push_back(static_cast<char>((nibble(hex[i]) << 4) | nibble(hex[i + 1])));
  return out;
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::string raw;
  for (int i = 7; i >= 0; --i) raw.push_back(static_cast<char>((h >> (8 * i)) & 0xff));
  return to_hex(raw);
}

ClassSignature class_signature(const BasicSubsystem& subsystem) {
  const Scope scope = subsystem.scope();
  std::string b = "class/1";
  put_u64(b, scope.size());
  for (std::size_t i = 0; i < scope.size(); ++i) {
    put_u64(b, scope.card(i));
    b.push_back(subsystem.internal.contains(scope.var(i)) ? 'i' : 'e');
  }
  put_doubles(b, subsystem.reward);
  put_doubles(b, subsystem.transition);
  return ClassSignature{b, fnv1a_hex(b)};
}

SubtreeSignature subtree_signature(const SubsystemTree& tree, const RelevanceWeights& weights, std::size_t j) {
  const Scope& scope = tree.scope(j);
  std::string b = "subtree/1";
  b += class_signature(tree.subsystem(j)).bytes;
  put_doubles(b, weights[j]);
  put_double(b, tree.discount());
  b += position_mask(scope, tree.sepset(j));
  std::vector<std::string> children;
  for (std::size_t k : tree.children(j)) {
    std::string c = position_mask(scope, tree.sepset(k));
    c += subtree_signature(tree, weights, k).bytes;
    children.push_back(std::move(c));
  }
  std::sort(children.begin(), children.end());
  put_u64(b, children.size());
  for (const auto& c : children) {
    put_u64(b, c.size());
    b += c;
  }
  return SubtreeSignature{b, fnv1a_hex(b)};
}

std::string ReuseCache::solution_key(const ClassSignature& cls, double discount, std::span<const double> weights,
                                     std::span<const double> reward) {
  std::string k = "solve/";
  k += cls.bytes;
  put_double(k, discount);
  put_doubles(k, weights);
  put_doubles(k, reward);
  return k;
}

std::string ReuseCache::flow_key(const ClassSignature& cls, double discount, std::span<const double> weights) {
  std::string k = "flows/";
  k += cls.bytes;
  put_double(k, discount);
  put_doubles(k, weights);
  return k;
}

const FlowSolution* ReuseCache::find_solution(const std::string& key) const {
  auto it = solutions_.find(key);
  return it == solutions_.end() ? nullptr : &it->second;
}

void ReuseCache::store_solution(const std::string& key, FlowSolution solution) {
  solutions_.emplace(key, std::move(solution));
}

void ReuseCache::add_flow(const std::string& key, std::vector<double> flow) {
  auto& pool = flows_[key];
  if (std::find(pool.begin(), pool.end(), flow) == pool.end()) pool.push_back(std::move(flow));
}

std::span<const std::vector<double>> ReuseCache::flows(const std::string& key) const {
  auto it = flows_.find(key);
  if (it == flows_.end()) return {};
  return it->second;
}

void ReuseCache::add_subtree_row(const SubtreeSignature& sig, SubtreeRow row) {
  auto& rows = subtree_rows_[sig.bytes];
  for (const auto& r : rows)
    if (r.value == row.value && r.frequencies == row.frequencies) return;
  rows.push_back(std::move(row));
}

std::span<const SubtreeRow> ReuseCache::subtree_rows(const SubtreeSignature& sig) const {
  auto it = subtree_rows_.find(sig.bytes);
  if (it == subtree_rows_.end()) return {};
  return it->second;
}

void ReuseCache::save(std::ostream& os) const {
  nlohmann::ordered_json j;
  j["format"] = "hfmdp-reuse-cache";
  j["version"] = kFormatVersion;
  auto& sols = j["solutions"] = nlohmann::ordered_json::array();
  for (const auto& [key, s] : solutions_) {
    sols.push_back({{"key", to_hex(key)},
                    {"flow", s.flow},
                    {"value", s.value},
                    {"adjusted_objective", s.adjusted_objective}});
  }
  auto& flows = j["flows"] = nlohmann::ordered_json::array();
  for (const auto& [key, pool] : flows_) flows.push_back({{"key", to_hex(key)}, {"flows", pool}});
  auto& subtrees = j["subtree_rows"] = nlohmann::ordered_json::array();
  for (const auto& [key, rows] : subtree_rows_) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) arr.push_back({{"value", r.value}, {"frequencies", r.frequencies}});
    subtrees.push_back({{"key", to_hex(key)}, {"rows", std::move(arr)}});
  }
  os << j.dump(1) << '\n';
}

ReuseCache ReuseCache::load(std::istream& is) {
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("reuse cache is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", std::string()) != "hfmdp-reuse-cache")
    throw InputError("file is not a reuse cache");
  if (j.value("version", -1) != kFormatVersion)
    throw InputError("reuse cache version " + std::to_string(j.value("version", -1)) + " is not supported (expected " +
                     std::to_string(kFormatVersion) + ")");
  ReuseCache cache;
  try {
    for (const auto& s : j.at("solutions")) {
      FlowSolution f;
      f.flow = s.at("flow").get<std::vector<double>>();
      f.value = s.at("value").get<std::vector<double>>();
      f.adjusted_objective = s.at("adjusted_objective").get<double>();
      cache.solutions_.emplace(from_hex(s.at("key").get<std::string>()), std::move(f));
    }
    for (const auto& f : j.at("flows"))
      cache.flows_[from_hex(f.at("key").get<std::string>())] = f.at("flows").get<std::vector<std::vector<double>>>();
    for (const auto& s : j.at("subtree_rows")) {
      auto& rows = cache.subtree_rows_[from_hex(s.at("key").get<std::string>())];
      for (const auto& r : s.at("rows"))
        rows.push_back({r.at("value").get<double>(), r.at("frequencies").get<std::vector<double>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed reuse cache: ") + e.what());
  }
  return cache;
}

std::size_t share_flows(ReuseCache& cache, const std::string& key, std::size_t& cursor,
                        const BasicSubsystem& recipient, double discount, std::span<const double> weights,
                        LocalPolicyBank& bank, double residual_tolerance) {
  const auto pool = cache.flows(key);
  const Scope scope = recipient.scope();
  std::size_t added = 0;
  for (; cursor < pool.size(); ++cursor) {
    const auto& flow = pool[cursor];
    if (flow.size() != scope.assignment_count() ||
        conservation_residual(recipient, discount, flow, weights) > residual_tolerance) {
      ++cache.ledger().flow_rows_rejected;
      continue;
    }
    FlowSolution f;
    f.flow = flow;
    if (record_policy(bank, f, scope, recipient.reward)) {
      ++added;
      ++cache.ledger().flow_rows_donated;
    }
  }
  return added;
}

std::vector<SubtreeRow> share_subtree_rows(const ReuseCache& cache, const SubtreeSignature& donor,
                                           const SubtreeSignature& recipient, std::size_t& cursor) {
  if (!(donor == recipient)) throw InputError("subtrees are not equivalent; refusing to share rows");
  const auto rows = cache.subtree_rows(donor);
  std::vector<SubtreeRow> out;
  for (; cursor < rows.size(); ++cursor) out.push_back(rows[cursor]);
  return out;
}

}  // namespace hfmdp
