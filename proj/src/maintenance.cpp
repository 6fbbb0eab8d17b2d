#include "deltatree/maintenance.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "deltatree/tree.hpp"

namespace deltatree {

const char* to_string(MaintenanceAction a) {
  switch (a) {
    case MaintenanceAction::kNone: return "none";
    case MaintenanceAction::kRebalance: return "rebalance";
    case MaintenanceAction::kExpand: return "expand";
    case MaintenanceAction::kFlush: return "flush";
    case MaintenanceAction::kMerge: return "merge";
  }
  return "unknown";
}

MaintenanceAction overflow_action(const DeltaParams& p, const Thresholds& t, std::int64_t total,
                                  bool has_children) {
  const double dens = static_cast<double>(total) / static_cast<double>(p.ub);
  if (dens > t.expand_density || total > static_cast<std::int64_t>(p.leaf_capacity())) {
    return MaintenanceAction::kExpand;
  }
  return has_children ? MaintenanceAction::kFlush : MaintenanceAction::kRebalance;
}

MaintenanceAction delete_action(const DeltaParams& p, const Thresholds& t, std::int64_t total,
                                bool has_children, std::optional<std::int64_t> sibling_total) {
  if (has_children || !sibling_total) return MaintenanceAction::kNone;
  const double dens = static_cast<double>(total) / static_cast<double>(p.ub);
  if (dens >= t.merge_fill) return MaintenanceAction::kNone;
  if (total + *sibling_total > static_cast<std::int64_t>(p.leaf_capacity())) {
    return MaintenanceAction::kNone;
  }
  return MaintenanceAction::kMerge;
}

struct Tree::Gathered {
  std::vector<Key> leaves;   // live leaf keys, in order
  std::vector<Key> buffered;
  bool has_delta_links = false;

  std::int64_t total() const { return static_cast<std::int64_t>(leaves.size() + buffered.size()); }
  std::vector<Key> merged() const {
    std::vector<Key> out = leaves;
    out.insert(out.end(), buffered.begin(), buffered.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

namespace {

class Unlocker {
 public:
  explicit Unlocker(DeltaNode& d) : d_(&d) {}
  ~Unlocker() {
    if (d_) d_->unlock();
  }
  Unlocker(const Unlocker&) = delete;
  Unlocker& operator=(const Unlocker&) = delete;

 private:
  DeltaNode* d_;
};

Offset offset_in_half(const DeltaNode& d, const Node* n) {
  return static_cast<Offset>(d.slot_index(n) % d.params().ub);
}

}  // namespace

Tree::Gathered Tree::gather(const DeltaNode& d, std::uint32_t half) const {
  Gathered g;
  // In-order walk of the reachable slots.
  std::vector<const Node*> stack;
  const Node* p = d.half_base(half);
  while (p || !stack.empty()) {
    while (p) {
      const SlotState s = p->load();
      if (s.is_leaf()) {
        if (!s.empty() && !s.marked()) g.leaves.push_back(s.value());
        p = nullptr;
        break;
      }
      stack.push_back(p);
      const Link l = p->left_link();
      if (l.is_delta()) {
        g.has_delta_links = true;
        p = nullptr;
      } else {
        p = l.slot();
      }
    }
    if (stack.empty()) break;
    const Node* top = stack.back();
    stack.pop_back();
    const Link r = top->right_link();
    if (r.is_delta()) {
      g.has_delta_links = true;
      p = nullptr;
    } else {
      p = r.slot();
    }
  }
  for (const auto& c : d.buffer(half)) {
    const Key v = c.load(std::memory_order_acquire);
    if (v != kEmpty) g.buffered.push_back(v);
  }
  return g;
}

void Tree::build_balanced(DeltaNode& d, std::uint32_t half, const std::vector<Key>& keys) const {
  const LayoutTable& t = d.layout();
  std::vector<std::uint64_t> by_bfs(params_.ub, 0);
  // Left side takes ceil(n/2) keys; the router is the first key on the right.
  struct Frame {
    std::size_t bfs, lo, hi;
  };
  std::vector<Frame> work{{0, 0, keys.size()}};
  while (!work.empty()) {
    const Frame f = work.back();
    work.pop_back();
    const std::size_t n = f.hi - f.lo;
    if (n <= 1) {
      by_bfs[f.bfs] = n == 0 ? 0 : SlotState::leaf(keys[f.lo]).word;
      continue;
    }
    if (2 * f.bfs + 2 >= params_.ub) throw std::logic_error("too many keys for one ΔNode");
    const std::size_t mid = f.lo + (n + 1) / 2;
    by_bfs[f.bfs] = SlotState::router(keys[mid]).word;
    work.push_back({2 * f.bfs + 1, f.lo, mid});
    work.push_back({2 * f.bfs + 2, mid, f.hi});
  }
  Node* base = d.half_base(half);
  for (Offset off = 0; off < params_.ub; ++off) {
    Node& n = base[off];
    const Offset l = t.left_child_offset[off];
    const Offset r = t.right_child_offset[off];
    n.left.store(l == kNoOffset ? 0 : Link::to_slot(base + l).bits(), std::memory_order_relaxed);
    n.right.store(r == kNoOffset ? 0 : Link::to_slot(base + r).bits(), std::memory_order_relaxed);
    n.state.store(by_bfs[t.offset_to_bfs[off]], std::memory_order_relaxed);
  }
  std::atomic_thread_fence(std::memory_order_release);
}

void Tree::rebalance_locked(DeltaNode& d, const std::vector<Key>& keys) {
  d.quiesce_mirror();
  DELTATREE_INTERLEAVE();
  const std::uint32_t mirror = 1 - d.active_half();
  build_balanced(d, mirror, keys);
  for (auto& c : d.buffer(mirror)) c.store(kEmpty, std::memory_order_relaxed);
  d.switch_halves();
  d.set_counts(static_cast<std::int64_t>(keys.size()), 0);
  rebalances_.fetch_add(1, std::memory_order_relaxed);
  nodes_touched_.fetch_add(keys.size() + params_.ub + params_.buffer_capacity,
                           std::memory_order_relaxed);
}

std::vector<DeltaNode*> Tree::expand_locked(DeltaNode& d, Node* only_leaf) {
  const std::uint32_t half = d.active_half();
  Node* base = d.half_base(half);
  const LayoutTable& t = d.layout();
  auto cells = d.buffer(half);

  // Destination leaf of every buffered key, in key order per leaf.
  std::map<Node*, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Key b = cells[i].load(std::memory_order_acquire);
    if (b == kEmpty) continue;
    Node* p = base;
    bool crossed = false;
    for (;;) {
      const SlotState s = p->load();
      if (s.is_leaf()) break;
      const Link l = s.value() > b ? p->left_link() : p->right_link();
      if (l.is_delta()) {
        crossed = true;
        break;
      }
      p = l.slot();
    }
    if (crossed || p == base) continue;
    if (only_leaf && p != only_leaf) continue;
    groups[p].push_back(i);
  }
  if (only_leaf) groups.try_emplace(only_leaf);

  std::vector<DeltaNode*> made;
  std::vector<std::size_t> cleared;
  std::int64_t leaving = 0;
  for (auto& [x, idx] : groups) {
    std::vector<Key> keys;
    for (std::size_t i : idx) keys.push_back(cells[i].load(std::memory_order_relaxed));
    const SlotState xs = x->load();
    if (!xs.empty() && !xs.marked()) {
      keys.push_back(xs.value());
      ++leaving;
    }
    std::sort(keys.begin(), keys.end());
    DeltaNode& c = new_child(d);
    build_balanced(c, 0, keys);
    c.set_counts(static_cast<std::int64_t>(keys.size()), 0);

    Node* par = base + t.parent_offset[offset_in_half(d, x)];
    const Link to_c = Link::to_delta(&c);
    DELTATREE_INTERLEAVE();
    if (par->left_link().slot() == x) {
      par->left.store(to_c.bits(), std::memory_order_seq_cst);
    } else {
      par->right.store(to_c.bits(), std::memory_order_seq_cst);
    }
    d.set_children(d.children() + 1);
    made.push_back(&c);
    cleared.insert(cleared.end(), idx.begin(), idx.end());
    nodes_touched_.fetch_add(keys.size() + params_.ub + 1 + idx.size(), std::memory_order_relaxed);
  }

  // Moved keys stay in the buffer until no reader can be on a path that
  // predates the new links.
  if (!cleared.empty()) d.quiesce_mirror();
  for (std::size_t i : cleared) cells[i].store(kEmpty, std::memory_order_release);
  const auto moved = static_cast<std::int64_t>(cleared.size());
  d.set_counts(d.countnode() - moved - leaving, d.bcount() - moved);
  expands_.fetch_add(made.size(), std::memory_order_relaxed);
  return made;
}

void Tree::overflow_maintenance_locked(DeltaNode& d) {
  const Gathered g = gather(d, d.active_half());
  d.set_counts(g.total(), static_cast<std::int64_t>(g.buffered.size()));
  const bool has_children = d.children() > 0;
  switch (overflow_action(params_, config_.thresholds, g.total(), has_children)) {
    case MaintenanceAction::kRebalance:
      rebalance_locked(d, g.merged());
      break;
    case MaintenanceAction::kExpand:
    case MaintenanceAction::kFlush:
      expand_locked(d, nullptr);
      break;
    default:
      break;
  }
}

void Tree::rebalance(DeltaNode& d) {
  d.lock();
  Unlocker unlock(d);
  d.spin_wait_drained();
  if (d.retired()) throw std::logic_error("cannot rebalance a retired ΔNode");
  if (d.children() > 0) throw std::logic_error("cannot rebalance a ΔNode with children");
  const Gathered g = gather(d, d.active_half());
  const std::vector<Key> keys = g.merged();
  if (keys.size() > params_.leaf_capacity()) {
    throw std::logic_error("ΔNode holds more keys than a rebuilt tree can");
  }
  rebalance_locked(d, keys);
}

DeltaNode& Tree::expand(DeltaNode& d, Node& leaf) {
  d.lock();
  Unlocker unlock(d);
  d.spin_wait_drained();
  if (d.retired()) throw std::logic_error("cannot expand a retired ΔNode");
  if (!d.owns(&leaf) || leaf.half != d.active_half() || leaf.depth < 2 || !leaf.load().is_leaf()) {
    throw std::invalid_argument("expand needs a non-root leaf of the active half");
  }
  // The leaf must be reachable.
  const Node* par = d.half_base(leaf.half) + d.layout().parent_offset[offset_in_half(d, &leaf)];
  if (par->load().is_leaf() ||
      (par->left_link().slot() != &leaf && par->right_link().slot() != &leaf)) {
    throw std::invalid_argument("expand needs a reachable leaf");
  }
  const auto made = expand_locked(d, &leaf);
  return *made.front();
}

Node* Tree::find_router_of(DeltaNode& parent, const DeltaNode& child, bool* child_on_left) const {
  std::vector<Node*> stack{parent.root()};
  while (!stack.empty()) {
    Node* p = stack.back();
    stack.pop_back();
    if (p->load().is_leaf()) continue;
    const Link l = p->left_link();
    const Link r = p->right_link();
    if (l.delta() == &child || r.delta() == &child) {
      if (child_on_left) *child_on_left = l.delta() == &child;
      return p;
    }
    if (!l.null() && !l.is_delta()) stack.push_back(l.slot());
    if (!r.null() && !r.is_delta()) stack.push_back(r.slot());
  }
  return nullptr;
}

DeltaNode* Tree::sibling_of(const DeltaNode& d) const {
  DeltaNode* p = d.parent();
  if (!p) return nullptr;
  bool left = false;
  Node* q = find_router_of(*p, d, &left);
  if (!q) return nullptr;
  return (left ? q->right_link() : q->left_link()).delta();
}

MaintenanceAction Tree::maintenance_trigger(const DeltaNode& d, TriggerCause cause) const {
  if (cause == TriggerCause::kInsertOverflow) {
    return overflow_action(params_, config_.thresholds, d.countnode(), d.children() > 0);
  }
  if (&d == root_) return MaintenanceAction::kNone;
  std::optional<std::int64_t> sib;
  if (const DeltaNode* s = sibling_of(d); s && s->children() == 0) sib = s->countnode();
  return delete_action(params_, config_.thresholds, d.countnode(), d.children() > 0, sib);
}

bool Tree::merge(DeltaNode& d) {
  if (&d == root_) return false;
  if (!d.try_lock()) return false;
  Unlocker unlock_d(d);
  if (d.retired() || d.children() > 0) return false;
  DeltaNode* p = d.parent();
  if (!p) return false;
  bool left = false;
  Node* q = find_router_of(*p, d, &left);
  if (!q) return false;
  DeltaNode* s = (left ? q->right_link() : q->left_link()).delta();
  if (!s || !s->try_lock()) return false;
  Unlocker unlock_s(*s);
  if (!p->try_lock()) return false;
  Unlocker unlock_p(*p);
  d.spin_wait_drained();
  s->spin_wait_drained();
  p->spin_wait_drained();
  return merge_locked(d, *s, *p, *q);
}

bool Tree::merge_locked(DeltaNode& d, DeltaNode& s, DeltaNode& p, Node& q) {
  if (d.retired() || s.retired() || p.retired()) return false;
  if (d.parent() != &p || s.parent() != &p) return false;
  if (d.children() > 0 || s.children() > 0) return false;
  // q must still be a reachable router of p joining exactly d and s.
  bool left = false;
  if (find_router_of(p, d, &left) != &q) return false;
  if ((left ? q.right_link() : q.left_link()).delta() != &s) return false;
  if (q.depth < 2) return false;

  const Gathered gd = gather(d, d.active_half());
  const Gathered gs = gather(s, s.active_half());
  d.set_counts(gd.total(), static_cast<std::int64_t>(gd.buffered.size()));
  s.set_counts(gs.total(), static_cast<std::int64_t>(gs.buffered.size()));
  if (delete_action(params_, config_.thresholds, gd.total(), false, gs.total()) !=
      MaintenanceAction::kMerge) {
    return false;
  }
  std::vector<Key> keys = gd.merged();
  const std::vector<Key> ks = gs.merged();
  keys.insert(keys.end(), ks.begin(), ks.end());
  std::sort(keys.begin(), keys.end());

  // The sibling absorbs d's keys first, then takes over q's place.
  s.quiesce_mirror();
  const std::uint32_t mirror = 1 - s.active_half();
  build_balanced(s, mirror, keys);
  for (auto& c : s.buffer(mirror)) c.store(kEmpty, std::memory_order_relaxed);
  s.switch_halves();
  s.set_counts(static_cast<std::int64_t>(keys.size()), 0);
  DELTATREE_INTERLEAVE();

  Node* base = p.half_base(q.half);
  Node* g = base + p.layout().parent_offset[offset_in_half(p, &q)];
  const Link to_s = Link::to_delta(&s);
  if (g->left_link().slot() == &q) {
    g->left.store(to_s.bits(), std::memory_order_seq_cst);
  } else {
    g->right.store(to_s.bits(), std::memory_order_seq_cst);
  }
  p.set_children(p.children() - 1);
  d.retire();
  merges_.fetch_add(1, std::memory_order_relaxed);
  nodes_touched_.fetch_add(keys.size() + params_.ub + params_.buffer_capacity + 1,
                           std::memory_order_relaxed);
  return true;
}

}  // namespace deltatree
