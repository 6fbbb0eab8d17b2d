#include "deltatree/delta_node.hpp"

#include <cassert>

namespace deltatree {

namespace {
std::atomic<std::uint32_t> g_next_id{1};
}

DeltaNode::DeltaNode(const DeltaParams& params, std::uint32_t id, std::uint32_t level)
    : params_(params),
      layout_(cached_layout(params.height)),
      id_(id),
      level_(level),
      nodes_(new Node[2 * params.ub]),
      buffers_(new std::atomic<Key>[2 * params.buffer_capacity]) {
  for (std::uint32_t i = 0; i < 2 * params_.buffer_capacity; ++i) {
    buffers_[i].store(kEmpty, std::memory_order_relaxed);
  }
  wire_half(0);
  wire_half(1);
}

void DeltaNode::wire_half(std::uint32_t half) {
  Node* base = half_base(half);
  const LayoutTable& t = *layout_;
  for (Offset off = 0; off < params_.ub; ++off) {
    Node& n = base[off];
    n.state.store(0, std::memory_order_relaxed);
    const Offset l = t.left_child_offset[off];
    const Offset r = t.right_child_offset[off];
    n.left.store(l == kNoOffset ? 0 : Link::to_slot(base + l).bits(), std::memory_order_relaxed);
    n.right.store(r == kNoOffset ? 0 : Link::to_slot(base + r).bits(), std::memory_order_relaxed);
    n.depth = static_cast<std::uint16_t>(t.depth[off]);
    n.tid = t.offset_to_bfs[off] == 0 ? id_ : 0;
    n.half = static_cast<std::uint16_t>(half);
  }
}

PutResult DeltaNode::buffer_put(std::uint32_t half, Key v) {
  assert(v != kEmpty);
  Backoff backoff;
  while (put_flag_.exchange(true, std::memory_order_acquire)) backoff.pause();
  PutResult result = PutResult::kFull;
  auto cells = buffer(half);
  bool present = false;
  for (const auto& c : cells) {
    if (c.load(std::memory_order_acquire) == v) {
      present = true;
      break;
    }
  }
  if (present) {
    result = PutResult::kPresent;
  } else {
    // Removes may free cells concurrently but never fill them, so a CAS
    // from EMPTY only competes with nothing but itself.
    for (auto& c : cells) {
      Key expected = kEmpty;
      if (c.compare_exchange_strong(expected, v, std::memory_order_acq_rel)) {
        bcount_.fetch_add(1, std::memory_order_relaxed);
        countnode_.fetch_add(1, std::memory_order_relaxed);
        result = PutResult::kInserted;
        break;
      }
    }
  }
  put_flag_.store(false, std::memory_order_release);
  return result;
}

bool DeltaNode::buffer_find(std::uint32_t half, Key v, std::uint32_t* scanned) const {
  std::uint32_t n = 0;
  bool found = false;
  for (const auto& c : buffer(half)) {
    ++n;
    if (c.load(std::memory_order_acquire) == v) {
      found = true;
      break;
    }
  }
  if (scanned) *scanned = n;
  return found;
}

bool DeltaNode::buffer_remove(std::uint32_t half, Key v) {
  for (auto& c : buffer(half)) {
    Key expected = v;
    if (c.load(std::memory_order_acquire) == v &&
        c.compare_exchange_strong(expected, kEmpty, std::memory_order_acq_rel)) {
      bcount_.fetch_sub(1, std::memory_order_relaxed);
      countnode_.fetch_sub(1, std::memory_order_relaxed);
      return true;
    }
  }
  return false;
}

void DeltaNode::lock() {
  Backoff backoff;
  while (!try_lock()) backoff.pause();
}

void DeltaNode::flag_down() {
  [[maybe_unused]] const auto prev = opcount_.fetch_sub(1, std::memory_order_seq_cst);
  assert(prev > 0 && "flag_down without matching flag_up");
}

void DeltaNode::wait_and_check() {
  for (;;) {
    Backoff backoff;
    while (locked()) backoff.pause();
    flag_up();
    if (!lock_.load(std::memory_order_seq_cst)) return;
    flag_down();
  }
}

void DeltaNode::spin_wait_drained() const {
  Backoff backoff;
  while (opcount_.load(std::memory_order_seq_cst) != 0) backoff.pause();
}

void DeltaNode::switch_halves() {
  const std::uint32_t next = 1 - active_.load(std::memory_order_relaxed);
  active_.store(next, std::memory_order_seq_cst);
}

void DeltaNode::quiesce_mirror() { EpochRegistry::instance().synchronize(); }

std::unique_ptr<DeltaNode> allocate_delta_node(const DeltaParams& params, std::uint32_t level) {
  return std::make_unique<DeltaNode>(params, g_next_id.fetch_add(1, std::memory_order_relaxed),
                                     level);
}

}  // namespace deltatree
