#include "deltatree/tree.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>
#include <stdexcept>

namespace deltatree {

namespace {

void check_key(Key v) {
  if (v == kEmpty || v > kMaxKey) {
    throw std::out_of_range("key must be in [1, 2^62 - 1]");
  }
}

DeltaParams validated_params(const TreeConfig& c) {
  DeltaParams p = DeltaParams::make(c.ub, c.buffer_capacity);
  if (p.height < 2) throw std::invalid_argument("ub must be at least 3");
  if (p.buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be positive");
  if (p.buffer_capacity + 1 > p.leaf_capacity()) {
    throw std::invalid_argument("buffer_capacity + 1 must not exceed (ub + 1) / 2");
  }
  const auto in_unit = [](double x) { return x > 0.0 && x <= 1.0; };
  if (!in_unit(c.thresholds.expand_density) || !in_unit(c.thresholds.merge_fill)) {
    throw std::invalid_argument("thresholds must lie in (0, 1]");
  }
  return p;
}

}  // namespace

Tree::Tree(const TreeConfig& config)
    : config_(config), params_(validated_params(config)), auto_maintenance_(config.maintenance_enabled) {
  deltas_.push_back(allocate_delta_node(params_, 1));
  root_ = deltas_.back().get();
}

Tree::~Tree() = default;

OpResult Tree::search_traced(Key v) const {
  check_key(v);
  ReadGuard guard;
  OpResult r;
  const DeltaNode* d = root_;
  std::uint32_t half = d->active_half();
  const Node* p = d->half_base(half);
  r.deltas = 1;
  SlotState s;
  for (;;) {
    ++r.path_steps;
    s = p->load();
    if (s.is_leaf()) break;
    const Link next = s.value() > v ? p->left_link() : p->right_link();
    DELTATREE_INTERLEAVE();
    if (next.is_delta()) {
      d = next.delta();
      half = d->active_half();
      p = d->half_base(half);
      ++r.deltas;
    } else {
      p = next.slot();
    }
  }
  if (!s.empty() && s.value() == v) {
    r.found_or_applied = !s.marked();
    return r;
  }
  std::uint32_t scanned = 0;
  r.found_or_applied = d->buffer_find(half, v, &scanned);
  r.path_steps += scanned;
  return r;
}

bool Tree::grow(Node& leaf, SlotState seen, Key v) {
  Node* l = leaf.left_link().slot();
  Node* r = leaf.right_link().slot();
  assert(l && r);
  const Key old = seen.value();
  const bool go_left = v < old;
  // Claiming the left child is what serialises concurrent growers.
  SlotState first = go_left ? SlotState::leaf(v) : SlotState::leaf(old, seen.marked());
  if (!l->cas(SlotState{}, first)) return false;
  DELTATREE_INTERLEAVE();
  for (;;) {
    if (go_left) {
      r->state.store(SlotState::leaf(old, seen.marked()).word, std::memory_order_relaxed);
    } else {
      l->state.store(SlotState::leaf(old, seen.marked()).word, std::memory_order_relaxed);
      r->state.store(SlotState::leaf(v).word, std::memory_order_relaxed);
    }
    DELTATREE_INTERLEAVE();
    if (leaf.cas(seen, SlotState::router(go_left ? old : v))) return true;
    // Only the mark can have changed: the claim keeps other growers out.
    seen = leaf.load();
    assert(seen.is_leaf() && seen.value() == old);
  }
}

OpResult Tree::insert_traced(Key v) {
  check_key(v);
  OpResult r;
  for (;;) {
    DeltaNode* d = root_;
    d->wait_and_check();
    r.deltas = 1;
    Node* p = d->root();
    bool restart = false;
    while (!restart) {
      ++r.path_steps;
      const SlotState s = p->load();
      if (!s.is_leaf()) {
        const Link next = s.value() > v ? p->left_link() : p->right_link();
        if (next.is_delta()) {
          DeltaNode* c = next.delta();
          d->flag_down();
          DELTATREE_INTERLEAVE();
          c->wait_and_check();
          if (c->retired()) {
            c->flag_down();
            restart = true;
            break;
          }
          d = c;
          p = c->root();
          ++r.deltas;
        } else {
          p = next.slot();
        }
        continue;
      }
      DELTATREE_INTERLEAVE();
      if (s.empty()) {
        if (p->cas(s, SlotState::leaf(v))) {
          d->add_count(1);
          d->flag_down();
          r.found_or_applied = true;
          return r;
        }
        ++r.retries;
        continue;
      }
      if (s.value() == v) {
        if (!s.marked()) {
          d->flag_down();
          return r;
        }
        if (p->cas(s, SlotState::leaf(v))) {
          d->add_count(1);
          d->flag_down();
          r.found_or_applied = true;
          return r;
        }
        ++r.retries;
        continue;
      }
      if (!d->last_level(*p)) {
        if (grow(*p, s, v)) {
          d->add_count(1);
          d->flag_down();
          r.found_or_applied = true;
          return r;
        }
        // Another grower owns this leaf; wait for its state word to move.
        ++r.retries;
        Backoff backoff;
        while (p->load() == s) backoff.pause();
        continue;
      }
      switch (d->buffer_put(p->half, v)) {
        case PutResult::kPresent:
          d->flag_down();
          return r;
        case PutResult::kInserted:
          r.found_or_applied = true;
          after_overflow(*d);
          return r;
        case PutResult::kFull:
          d->flag_down();
          if (!auto_maintenance()) {
            throw std::length_error("overflow buffer full with maintenance disabled");
          }
          d->lock();
          d->spin_wait_drained();
          if (!d->retired()) overflow_maintenance_locked(*d);
          d->unlock();
          ++r.retries;
          restart = true;
          break;
      }
    }
  }
}

void Tree::after_overflow(DeltaNode& d) {
  if (!auto_maintenance()) {
    d.flag_down();
    return;
  }
  // The lock is taken before releasing our own opcount, so a pending merge
  // cannot retire d underneath us.
  if (d.try_lock()) {
    d.flag_down();
    d.spin_wait_drained();
    overflow_maintenance_locked(d);
    d.unlock();
  } else {
    d.flag_down();
  }
}

OpResult Tree::remove_traced(Key v) {
  check_key(v);
  OpResult r;
  for (;;) {
    DeltaNode* d = root_;
    d->wait_and_check();
    r.deltas = 1;
    Node* p = d->root();
    bool restart = false;
    while (!restart) {
      ++r.path_steps;
      const SlotState s = p->load();
      if (!s.is_leaf()) {
        const Link next = s.value() > v ? p->left_link() : p->right_link();
        if (next.is_delta()) {
          DeltaNode* c = next.delta();
          d->flag_down();
          DELTATREE_INTERLEAVE();
          c->wait_and_check();
          if (c->retired()) {
            c->flag_down();
            restart = true;
            break;
          }
          d = c;
          p = c->root();
          ++r.deltas;
        } else {
          p = next.slot();
        }
        continue;
      }
      DELTATREE_INTERLEAVE();
      bool removed = false;
      if (!s.empty() && s.value() == v) {
        if (s.marked()) {
          d->flag_down();
          return r;
        }
        if (!p->cas(s, SlotState::leaf(v, true))) {
          ++r.retries;
          continue;
        }
        d->add_count(-1);
        removed = true;
      } else {
        removed = d->buffer_remove(p->half, v);
      }
      d->flag_down();
      r.found_or_applied = removed;
      if (removed) maybe_merge(*d);
      return r;
    }
  }
}

void Tree::maybe_merge(DeltaNode& d) {
  if (!auto_maintenance() || &d == root_) return;
  if (d.children() != 0 || d.retired()) return;
  if (d.density() >= config_.thresholds.merge_fill) return;
  merge(d);
}

std::int64_t Tree::size_estimate() const {
  std::int64_t total = 0;
  for_each_delta([&](const DeltaNode& d) {
    if (!d.retired()) total += d.countnode();
  });
  return total;
}

MaintenanceStats Tree::stats() const {
  MaintenanceStats s;
  s.rebalances = rebalances_.load(std::memory_order_relaxed);
  s.expands = expands_.load(std::memory_order_relaxed);
  s.merges = merges_.load(std::memory_order_relaxed);
  s.nodes_touched = nodes_touched_.load(std::memory_order_relaxed);
  return s;
}

void Tree::for_each_delta(const std::function<void(const DeltaNode&)>& fn) const {
  std::vector<const DeltaNode*> snapshot;
  {
    std::lock_guard lk(registry_mu_);
    snapshot.reserve(deltas_.size());
    for (const auto& d : deltas_) snapshot.push_back(d.get());
  }
  for (const DeltaNode* d : snapshot) fn(*d);
}

std::size_t Tree::delta_count(bool include_retired) const {
  std::lock_guard lk(registry_mu_);
  if (include_retired) return deltas_.size();
  return static_cast<std::size_t>(std::count_if(
      deltas_.begin(), deltas_.end(), [](const auto& d) { return !d->retired(); }));
}

std::uint64_t Tree::height_bound() const {
  return std::uint64_t{max_level_.load(std::memory_order_acquire)} * params_.height;
}

DeltaNode& Tree::new_child(DeltaNode& parent) {
  auto child = allocate_delta_node(params_, parent.level() + 1);
  child->set_parent(&parent);
  DeltaNode* raw = child.get();
  {
    std::lock_guard lk(registry_mu_);
    deltas_.push_back(std::move(child));
  }
  std::uint32_t cur = max_level_.load(std::memory_order_relaxed);
  while (cur < raw->level() &&
         !max_level_.compare_exchange_weak(cur, raw->level(), std::memory_order_acq_rel)) {
  }
  return *raw;
}

// ---- Quiescent inspection ----

namespace {

struct Walker {
  std::vector<Key>* keys = nullptr;
  std::uint64_t max_height = 0;
  std::ostringstream* err = nullptr;

  void fail(const std::string& msg) {
    if (err && err->tellp() == 0) *err << msg;
  }

  // Visits the subtree under slot `p` of ΔNode `d`; keys must lie in [lo, hi).
  void visit(const DeltaNode& d, const Node* p, std::uint64_t depth, Key lo, Key hi) {
    const SlotState s = p->load();
    if (s.is_leaf()) {
      max_height = std::max(max_height, depth);
      if (!s.empty() && !s.marked()) {
        if (s.value() < lo || s.value() >= hi) fail("leaf key outside router range");
        if (keys) keys->push_back(s.value());
      }
      return;
    }
    const Key k = s.value();
    if (k < lo || k >= hi) fail("router key outside range");
    follow(d, p->left_link(), depth, lo, k);
    follow(d, p->right_link(), depth, k, hi);
  }

  void follow(const DeltaNode& d, Link l, std::uint64_t depth, Key lo, Key hi) {
    if (l.null()) {
      fail("router with a null child");
      return;
    }
    if (l.is_delta()) {
      const DeltaNode& c = *l.delta();
      if (c.retired()) fail("reachable retired ΔNode");
      if (c.parent() != &d) fail("child ΔNode parent pointer mismatch");
      if (c.level() != d.level() + 1) fail("child ΔNode level mismatch");
      enter(c, depth + 1, lo, hi);
      return;
    }
    if (!d.owns(l.slot())) fail("slot link leaves its ΔNode");
    visit(d, l.slot(), depth + 1, lo, hi);
  }

  void enter(const DeltaNode& d, std::uint64_t depth, Key lo, Key hi) {
    if (d.opcount() != 0) fail("opcount not drained at quiescence");
    if (d.locked()) fail("ΔNode lock held at quiescence");
    const std::size_t before = keys ? keys->size() : 0;
    visit(d, d.root(), depth, lo, hi);
    for (const auto& c : d.active_buffer()) {
      const Key v = c.load();
      if (v == kEmpty) continue;
      if (v < lo || v >= hi) fail("buffered key outside range");
      if (keys) keys->push_back(v);
    }
    (void)before;
  }
};

}  // namespace

std::vector<Key> Tree::live_keys() const {
  std::vector<Key> keys;
  Walker w;
  w.keys = &keys;
  w.enter(*root_, 1, 1, kMaxKey + 1);
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::uint64_t Tree::height() const {
  Walker w;
  w.enter(*root_, 1, 1, kMaxKey + 1);
  return w.max_height;
}

std::vector<Key> Tree::delta_keys(const DeltaNode& d) const {
  std::vector<Key> keys;
  // Only this ΔNode: stop at child links.
  std::vector<const Node*> stack{d.root()};
  while (!stack.empty()) {
    const Node* p = stack.back();
    stack.pop_back();
    const SlotState s = p->load();
    if (s.is_leaf()) {
      if (!s.empty() && !s.marked()) keys.push_back(s.value());
      continue;
    }
    for (const Link l : {p->left_link(), p->right_link()}) {
      if (!l.null() && !l.is_delta()) stack.push_back(l.slot());
    }
  }
  for (const auto& c : d.active_buffer()) {
    const Key v = c.load();
    if (v != kEmpty) keys.push_back(v);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

std::string Tree::check_invariants() const {
  std::ostringstream err;
  std::vector<Key> keys;
  Walker w;
  w.keys = &keys;
  w.err = &err;
  w.enter(*root_, 1, 1, kMaxKey + 1);
  if (err.tellp() != 0) return err.str();
  std::vector<Key> sorted = keys;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    return "duplicate live key";
  }
  if (w.max_height > height_bound()) return "height exceeds height bound";

  std::string result;
  for_each_delta([&](const DeltaNode& d) {
    if (!result.empty() || d.retired()) return;
    std::int64_t buffered = 0;
    for (const auto& c : d.active_buffer()) buffered += c.load() != kEmpty;
    const auto live = static_cast<std::int64_t>(delta_keys(d).size());
    if (d.bcount() != buffered) {
      result = "bcount mismatch in ΔNode " + std::to_string(d.id());
    } else if (d.countnode() != live) {
      result = "countnode mismatch in ΔNode " + std::to_string(d.id()) + ": " +
               std::to_string(d.countnode()) + " vs " + std::to_string(live);
    }
    std::uint32_t kids = 0;
    std::vector<const Node*> stack{d.root()};
    while (!stack.empty()) {
      const Node* p = stack.back();
      stack.pop_back();
      if (p->load().is_leaf()) continue;
      for (const Link l : {p->left_link(), p->right_link()}) {
        if (l.is_delta()) {
          ++kids;
        } else if (!l.null()) {
          stack.push_back(l.slot());
        }
      }
    }
    if (result.empty() && kids != d.children()) {
      result = "children count mismatch in ΔNode " + std::to_string(d.id());
    }
  });
  return result;
}

}  // namespace deltatree
