#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "deltatree/delta_node.hpp"
#include "deltatree/maintenance.hpp"

namespace deltatree {

struct TreeConfig {
  std::uint64_t ub = 127;
  std::uint32_t buffer_capacity = 16;
  Thresholds thresholds;
  /// When false, overflowing inserts only fill the buffer and deletes never
  /// merge. Used to observe update interaction without maintenance.
  bool maintenance_enabled = true;
};

/// Instrumented result of one operation.
struct OpResult {
  bool found_or_applied = false;
  std::uint32_t path_steps = 0;  // slots visited plus buffer cells scanned
  std::uint32_t retries = 0;     // re-attempts after a failed CAS
  std::uint32_t deltas = 0;      // ΔNodes entered
};

/// Concurrent ordered set of positive keys (below 2^62) stored as a tree of
/// ΔNodes. search() is wait-free; insert() and remove() are lock-free against
/// each other and wait only at the entry of a ΔNode under maintenance.
class Tree {
 public:
  explicit Tree(const TreeConfig& config = {});
  ~Tree();
  Tree(const Tree&) = delete;
  Tree& operator=(const Tree&) = delete;

  bool search(Key v) const { return search_traced(v).found_or_applied; }
  bool insert(Key v) { return insert_traced(v).found_or_applied; }
  bool remove(Key v) { return remove_traced(v).found_or_applied; }

  OpResult search_traced(Key v) const;
  OpResult insert_traced(Key v);
  OpResult remove_traced(Key v);

  /// Sum of per-ΔNode live counts; exact only at quiescence.
  std::int64_t size_estimate() const;

  const TreeConfig& config() const { return config_; }
  /// Switches the maintenance triggered by inserts and deletes on or off.
  /// Explicit rebalance/expand/merge calls are unaffected.
  void set_auto_maintenance(bool on) { auto_maintenance_.store(on, std::memory_order_relaxed); }
  bool auto_maintenance() const { return auto_maintenance_.load(std::memory_order_relaxed); }
  const DeltaParams& params() const { return params_; }
  MaintenanceStats stats() const;

  DeltaNode& root_delta() { return *root_; }
  const DeltaNode& root_delta() const { return *root_; }

  /// Visits every ΔNode ever allocated by this tree, in allocation order.
  void for_each_delta(const std::function<void(const DeltaNode&)>& fn) const;
  std::size_t delta_count(bool include_retired = false) const;

  /// Upper bound on the slot height of the tree at any point so far:
  /// deepest ΔNode level times the ΔNode height.
  std::uint64_t height_bound() const;

  // ---- Quiescent inspection (no concurrent updates) ----
  std::vector<Key> live_keys() const;
  /// Slot height: longest root-to-leaf path counted in slots.
  std::uint64_t height() const;
  /// Returns an empty string when all structural invariants hold.
  std::string check_invariants() const;

  // ---- Maintenance entry points ----
  // Each acquires the ΔNode lock(s) and drains in-flight updates itself.

  /// Rebuilds a childless ΔNode as a complete leaf-oriented tree in its mirror
  /// and switches halves. Throws std::logic_error if the ΔNode has children
  /// or holds more keys than fit.
  void rebalance(DeltaNode& d);
  /// Hangs a new child ΔNode at `leaf`, a last-level leaf of `d`'s active half.
  /// Buffered keys routed to that leaf move into the child.
  DeltaNode& expand(DeltaNode& d, Node& leaf);
  /// Folds `d` into its sibling ΔNode when both are childless and the trigger
  /// holds. Returns false (and changes nothing) otherwise.
  bool merge(DeltaNode& d);
  /// The action the trigger logic would pick for `d` right now.
  MaintenanceAction maintenance_trigger(const DeltaNode& d, TriggerCause cause) const;

  /// Live keys of one ΔNode (leaves and buffer) at quiescence, sorted.
  std::vector<Key> delta_keys(const DeltaNode& d) const;
  /// Sibling ΔNode of `d` under its parent router, if any.
  DeltaNode* sibling_of(const DeltaNode& d) const;

 private:
  struct Gathered;

  bool grow(Node& leaf, SlotState seen, Key v);
  void after_overflow(DeltaNode& d);
  void maybe_merge(DeltaNode& d);

  // Maintenance internals; callers hold the lock with opcount drained.
  void overflow_maintenance_locked(DeltaNode& d);
  void rebalance_locked(DeltaNode& d, const std::vector<Key>& keys);
  std::vector<DeltaNode*> expand_locked(DeltaNode& d, Node* only_leaf);
  bool merge_locked(DeltaNode& d, DeltaNode& sibling, DeltaNode& parent, Node& router);
  Gathered gather(const DeltaNode& d, std::uint32_t half) const;
  void build_balanced(DeltaNode& d, std::uint32_t half, const std::vector<Key>& keys) const;
  DeltaNode& new_child(DeltaNode& parent);
  Node* find_router_of(DeltaNode& parent, const DeltaNode& child, bool* child_on_left) const;

  TreeConfig config_;
  DeltaParams params_;
  DeltaNode* root_ = nullptr;
  std::atomic<bool> auto_maintenance_{true};

  mutable std::mutex registry_mu_;
  std::vector<std::unique_ptr<DeltaNode>> deltas_;
  std::atomic<std::uint32_t> max_level_{1};

  std::atomic<std::uint64_t> rebalances_{0};
  std::atomic<std::uint64_t> expands_{0};
  std::atomic<std::uint64_t> merges_{0};
  std::atomic<std::uint64_t> nodes_touched_{0};
};

}  // namespace deltatree
