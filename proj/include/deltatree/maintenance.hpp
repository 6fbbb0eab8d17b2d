#pragma once

#include <cstdint>
#include <optional>

#include "deltatree/veb_layout.hpp"

namespace deltatree {

struct Thresholds {
  /// Overflowing ΔNodes whose density exceeds this expand instead of
  /// rebalancing. 0.25 reproduces the `total * 4 >= UB + 1` reading.
  double expand_density = 0.5;
  /// A ΔNode below this density after a delete tries to merge.
  double merge_fill = 0.5;
};

enum class TriggerCause { kInsertOverflow, kDelete };

enum class MaintenanceAction { kNone, kRebalance, kExpand, kFlush, kMerge };

const char* to_string(MaintenanceAction a);

/// Work counters. nodes_touched counts values gathered plus node slots and
/// buffer cells written by maintenance.
struct MaintenanceStats {
  std::uint64_t rebalances = 0;
  std::uint64_t expands = 0;
  std::uint64_t merges = 0;
  std::uint64_t nodes_touched = 0;
};

/// Decision after an insert found no room at the last level. `total` is the
/// live key count including buffered keys.
MaintenanceAction overflow_action(const DeltaParams& p, const Thresholds& t, std::int64_t total,
                                  bool has_children);

/// Decision after a successful delete. `sibling_total` is empty when the
/// ΔNode has no childless sibling ΔNode.
MaintenanceAction delete_action(const DeltaParams& p, const Thresholds& t, std::int64_t total,
                                bool has_children, std::optional<std::int64_t> sibling_total);

}  // namespace deltatree
