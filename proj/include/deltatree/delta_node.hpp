#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>

#include "deltatree/epoch.hpp"
#include "deltatree/veb_layout.hpp"

namespace deltatree {

/// Keys are positive integers below 2^62; 0 is the reserved EMPTY value.
using Key = std::uint64_t;

inline constexpr Key kEmpty = 0;
inline constexpr Key kMaxKey = (Key{1} << 62) - 1;

class DeltaNode;
struct Node;

/// Packed per-slot state. Value, deleted mark and the router flag share one
/// word so that marking, reviving and turning a leaf into a router are each a
/// single CAS. The all-zero word is an unused (EMPTY) leaf.
struct SlotState {
  static constexpr std::uint64_t kRouterBit = std::uint64_t{1} << 63;
  static constexpr std::uint64_t kMarkBit = std::uint64_t{1} << 62;
  static constexpr std::uint64_t kValueMask = kMarkBit - 1;

  std::uint64_t word = 0;

  static constexpr SlotState leaf(Key v, bool marked = false) {
    return SlotState{v | (marked ? kMarkBit : 0)};
  }
  static constexpr SlotState router(Key v) { return SlotState{v | kRouterBit}; }

  constexpr Key value() const { return word & kValueMask; }
  constexpr bool marked() const { return (word & kMarkBit) != 0; }
  constexpr bool is_leaf() const { return (word & kRouterBit) == 0; }
  constexpr bool empty() const { return word == 0; }

  friend constexpr bool operator==(SlotState, SlotState) = default;
};

/// Tagged child reference: null, a slot in the same ΔNode, or a child ΔNode
/// (low bit set). Following a ΔNode link lands on that ΔNode's active root.
class Link {
 public:
  constexpr Link() = default;
  static Link to_slot(Node* n) { return Link(reinterpret_cast<std::uintptr_t>(n)); }
  static Link to_delta(DeltaNode* d) { return Link(reinterpret_cast<std::uintptr_t>(d) | 1u); }
  static constexpr Link from_bits(std::uintptr_t bits) { return Link(bits); }

  constexpr bool null() const { return bits_ == 0; }
  constexpr bool is_delta() const { return (bits_ & 1u) != 0; }
  Node* slot() const { return is_delta() ? nullptr : reinterpret_cast<Node*>(bits_); }
  DeltaNode* delta() const {
    return is_delta() ? reinterpret_cast<DeltaNode*>(bits_ & ~std::uintptr_t{1}) : nullptr;
  }
  constexpr std::uintptr_t bits() const { return bits_; }

  friend constexpr bool operator==(Link, Link) = default;

 private:
  constexpr explicit Link(std::uintptr_t b) : bits_(b) {}
  std::uintptr_t bits_ = 0;
};

/// One slot of a ΔNode's implicit complete binary tree (32 bytes).
struct Node {
  std::atomic<std::uint64_t> state{0};
  std::atomic<std::uintptr_t> left{0};
  std::atomic<std::uintptr_t> right{0};
  std::uint32_t tid = 0;    // ΔNode id on a root slot, 0 on interior slots
  std::uint16_t depth = 0;  // 1-based level inside the ΔNode
  std::uint16_t half = 0;   // 0 = primary, 1 = mirror

  SlotState load(std::memory_order mo = std::memory_order_acquire) const {
    return SlotState{state.load(mo)};
  }
  bool cas(SlotState expected, SlotState desired) {
    return state.compare_exchange_strong(expected.word, desired.word, std::memory_order_acq_rel,
                                         std::memory_order_acquire);
  }
  Link left_link() const { return Link::from_bits(left.load(std::memory_order_acquire)); }
  Link right_link() const { return Link::from_bits(right.load(std::memory_order_acquire)); }
};

static_assert(sizeof(Node) == 32, "node slots are sized for 32-byte simulator accounting");

enum class PutResult { kInserted, kPresent, kFull };

/// Fixed-capacity container: two vEB-ordered tree halves (active + mirror) in
/// one contiguous allocation, one overflow buffer per half, the maintenance
/// lock and the in-flight update counter.
class DeltaNode {
 public:
  DeltaNode(const DeltaParams& params, std::uint32_t id, std::uint32_t level = 1);
  DeltaNode(const DeltaNode&) = delete;
  DeltaNode& operator=(const DeltaNode&) = delete;

  std::uint32_t id() const { return id_; }
  std::uint32_t level() const { return level_; }
  const DeltaParams& params() const { return params_; }
  const LayoutTable& layout() const { return *layout_; }

  // Tree halves.
  std::uint32_t active_half() const { return active_.load(std::memory_order_acquire); }
  Node* half_base(std::uint32_t half) { return nodes_.get() + half * params_.ub; }
  const Node* half_base(std::uint32_t half) const { return nodes_.get() + half * params_.ub; }
  Node* root() { return half_base(active_half()); }
  const Node* root() const { return half_base(active_half()); }
  Offset root_offset() const { return active_half() * static_cast<Offset>(params_.ub); }
  Offset mirror_offset() const { return (1 - active_half()) * static_cast<Offset>(params_.ub); }
  std::span<Node> all_slots() { return {nodes_.get(), 2 * params_.ub}; }
  std::span<const Node> all_slots() const { return {nodes_.get(), 2 * params_.ub}; }
  /// Index of `n` in the contiguous 2·UB slot array.
  std::size_t slot_index(const Node* n) const { return static_cast<std::size_t>(n - nodes_.get()); }
  bool owns(const Node* n) const {
    return n >= nodes_.get() && n < nodes_.get() + 2 * params_.ub;
  }
  bool last_level(const Node& n) const { return n.depth == params_.height; }

  // Buffers.
  std::span<std::atomic<Key>> buffer(std::uint32_t half) {
    return {buffers_.get() + half * params_.buffer_capacity, params_.buffer_capacity};
  }
  std::span<const std::atomic<Key>> buffer(std::uint32_t half) const {
    return {buffers_.get() + half * params_.buffer_capacity, params_.buffer_capacity};
  }
  std::span<const std::atomic<Key>> active_buffer() const { return buffer(active_half()); }

  /// Adds `v` to the buffer of `half` unless present. Puts are serialised by a
  /// short per-ΔNode flag so that a key never occupies two cells.
  PutResult buffer_put(std::uint32_t half, Key v);
  PutResult buffer_put(Key v) { return buffer_put(active_half(), v); }
  /// Left-to-right scan; `scanned` receives the number of cells read.
  bool buffer_find(std::uint32_t half, Key v, std::uint32_t* scanned = nullptr) const;
  bool buffer_find(Key v) const { return buffer_find(active_half(), v); }
  bool buffer_remove(std::uint32_t half, Key v);
  bool buffer_remove(Key v) { return buffer_remove(active_half(), v); }

  // Synchronisation.
  bool try_lock() { return !lock_.exchange(true, std::memory_order_seq_cst); }
  void lock();
  void unlock() { lock_.store(false, std::memory_order_release); }
  bool locked() const { return lock_.load(std::memory_order_acquire); }

  void flag_up() { opcount_.fetch_add(1, std::memory_order_seq_cst); }
  void flag_down();
  std::int64_t opcount() const { return opcount_.load(std::memory_order_acquire); }
  /// Spins while the maintenance lock is held, raises opcount, and repeats if
  /// the lock was taken in between. Returns with opcount raised.
  void wait_and_check();
  /// Spins until no update is in flight inside this ΔNode.
  void spin_wait_drained() const;

  // Counters (advisory under concurrency, exact at quiescence).
  std::int64_t countnode() const { return countnode_.load(std::memory_order_relaxed); }
  std::int64_t bcount() const { return bcount_.load(std::memory_order_relaxed); }
  void add_count(std::int64_t d) { countnode_.fetch_add(d, std::memory_order_relaxed); }
  void set_counts(std::int64_t countnode, std::int64_t bcount) {
    countnode_.store(countnode, std::memory_order_relaxed);
    bcount_.store(bcount, std::memory_order_relaxed);
  }
  /// countnode / UB.
  double density() const { return static_cast<double>(countnode()) / static_cast<double>(params_.ub); }

  // ΔNode graph bookkeeping; mutated only by maintenance holding the locks.
  DeltaNode* parent() const { return parent_.load(std::memory_order_acquire); }
  void set_parent(DeltaNode* p) { parent_.store(p, std::memory_order_release); }
  std::uint32_t children() const { return children_.load(std::memory_order_acquire); }
  void set_children(std::uint32_t c) { children_.store(c, std::memory_order_release); }
  bool retired() const { return retired_.load(std::memory_order_acquire); }
  void retire() { retired_.store(true, std::memory_order_release); }

  /// Publishes the mirror as the active half (tree and buffer together) and
  /// records when the old half stopped being reachable for new readers.
  void switch_halves();
  /// Waits until no reader can still be walking the mirror half.
  void quiesce_mirror();

  /// Resets a half to unused slots wired per the layout.
  void wire_half(std::uint32_t half);

 private:
  DeltaParams params_;
  std::shared_ptr<const LayoutTable> layout_;
  std::uint32_t id_;
  std::uint32_t level_;
  std::unique_ptr<Node[]> nodes_;
  std::unique_ptr<std::atomic<Key>[]> buffers_;

  std::atomic<std::uint32_t> active_{0};
  std::atomic<bool> lock_{false};
  std::atomic<bool> put_flag_{false};
  std::atomic<std::int64_t> opcount_{0};
  std::atomic<std::int64_t> bcount_{0};
  std::atomic<std::int64_t> countnode_{0};
  std::atomic<DeltaNode*> parent_{nullptr};
  std::atomic<std::uint32_t> children_{0};
  std::atomic<bool> retired_{false};
};

/// Allocates a ΔNode with a fresh id from the global counter.
std::unique_ptr<DeltaNode> allocate_delta_node(const DeltaParams& params, std::uint32_t level = 1);

/// Density of a ΔNode: countnode / UB.
inline double density(const DeltaNode& d) { return d.density(); }

}  // namespace deltatree
