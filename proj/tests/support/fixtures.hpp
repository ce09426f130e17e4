#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "hfmdp/model.hpp"

namespace hfmdp::testing {

inline std::filesystem::path source_dir() { return HFMDP_SOURCE_DIR; }
inline std::filesystem::path model_path(const std::string& name) { return source_dir() / "models" / name; }

/// The two-subsystem coupled example built in code: M1 owns x (set directly
/// by action a, x=1 costs 3), M2 owns y (y′ = b ∧ x, y=1 earns 10), γ = 0.9.
inline SubsystemTree coupled_xy() {
  auto vars = std::make_shared<VariableSet>();
  for (const char* n : {"x", "y", "a", "b"}) vars->add(n, {"0", "1"});
  BasicSubsystem m1{"M1", vars->scope({"x"}), vars->scope({"a"}), {}, {}, ""};
  for (int x = 0; x < 2; ++x)
    for (int a = 0; a < 2; ++a) {
      m1.reward.push_back(-3.0 * x);
      m1.transition.push_back(a == 0 ? 1.0 : 0.0);
      m1.transition.push_back(a == 1 ? 1.0 : 0.0);
    }
  BasicSubsystem m2{"M2", vars->scope({"y"}), vars->scope({"x", "b"}), {}, {}, ""};
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int b = 0; b < 2; ++b) {
        m2.reward.push_back(10.0 * y);
        const bool next = b && x;
        m2.transition.push_back(next ? 0.0 : 1.0);
        m2.transition.push_back(next ? 1.0 : 0.0);
      }
  return SubsystemTree(vars, {m1, m2}, {std::nullopt, 0}, 0.9);
}

/// Three binary subsystems in a line, A - B - C, with B reading A's state
/// and C reading B's state. Used where a depth-2 tree is enough.
inline SubsystemTree small_chain() {
  auto vars = std::make_shared<VariableSet>();
  for (const char* n : {"p", "q", "r", "u", "v", "w"}) vars->add(n, {"0", "1"});
  auto make = [&](const char* name, const char* internal, std::initializer_list<std::string_view> ext,
                  double pay) {
    BasicSubsystem s{name, vars->scope({std::string_view(internal)}), vars->scope(ext), {}, {}, ""};
    const Scope sc = s.scope();
    for (AssignmentCursor c(sc); !c.done(); c.next()) {
      const auto own = c.values()[*sc.position(s.internal.var(0))];
      std::uint32_t sum = 0;
      for (auto v : c.values()) sum += v;
      s.reward.push_back(own ? pay : -0.5 * (sum - own));
      const double p1 = 0.15 + 0.7 * (static_cast<double>(sum) / static_cast<double>(sc.size()));
      s.transition.push_back(1.0 - p1);
      s.transition.push_back(p1);
    }
    return s;
  };
  auto a = make("A", "p", {"u"}, 1.0);
  auto b = make("B", "q", {"p", "v"}, 2.0);
  auto c = make("C", "r", {"q", "w"}, 3.0);
  return SubsystemTree(vars, {a, b, c}, {std::nullopt, 0, 1}, 0.9);
}

}  // namespace hfmdp::testing
