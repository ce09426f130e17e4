#include <algorithm>

#include "hfmdp/coordinator.hpp"

namespace hfmdp {

const char* to_string(ScheduleKind k) noexcept {
  switch (k) {
    case ScheduleKind::Sync: return "sync";
    case ScheduleKind::LeavesFirst: return "leaves-first";
    case ScheduleKind::Random: return "random";
  }
  return "unknown";
}

ScheduleKind parse_schedule(std::string_view name) {
  if (name == "sync") return ScheduleKind::Sync;
  if (name == "leaves-first") return ScheduleKind::LeavesFirst;
  if (name == "random") return ScheduleKind::Random;
  throw InputError("unknown schedule '" + std::string(name) + "' (expected sync, leaves-first or random)");
}

Schedule::Schedule(ScheduleKind kind, const SubsystemTree& tree, std::uint64_t seed) : kind_(kind), rng_(seed) {
  base_ = kind == ScheduleKind::LeavesFirst ? tree.postorder() : tree.preorder();
}

std::vector<std::size_t> Schedule::next_round() {
  std::vector<std::size_t> order = base_;
  if (kind_ == ScheduleKind::Random) {
    // Fisher-Yates with an explicit draw so the sequence does not depend on
    // the standard library's shuffle implementation.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng_() % i);
      std::swap(order[i - 1], order[j]);
    }
  }
  return order;
}

}  // namespace hfmdp
