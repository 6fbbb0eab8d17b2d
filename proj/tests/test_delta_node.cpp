#include <gtest/gtest.h>

#include <atomic>
#include <thread>
#include <vector>

#include "deltatree/delta_node.hpp"

using namespace deltatree;

TEST(SlotState, Packing) {
  const SlotState e{};
  EXPECT_TRUE(e.empty());
  EXPECT_TRUE(e.is_leaf());
  const SlotState l = SlotState::leaf(kMaxKey, true);
  EXPECT_EQ(l.value(), kMaxKey);
  EXPECT_TRUE(l.marked());
  EXPECT_TRUE(l.is_leaf());
  const SlotState r = SlotState::router(42);
  EXPECT_EQ(r.value(), 42u);
  EXPECT_FALSE(r.is_leaf());
  EXPECT_FALSE(r.marked());
}

TEST(DeltaNode, FreshContainerWiring) {
  const DeltaParams p = DeltaParams::make(127, 16);
  auto d = allocate_delta_node(p);
  const LayoutTable t = build_layout(7);
  ASSERT_EQ(d->all_slots().size(), 254u);
  for (std::uint32_t half = 0; half < 2; ++half) {
    const Node* base = d->half_base(half);
    for (Offset off = 0; off < 127; ++off) {
      const Node& n = base[off];
      EXPECT_TRUE(n.load().empty());
      EXPECT_EQ(n.half, half);
      EXPECT_EQ(n.depth, t.depth[off]);
      const Offset l = t.left_child_offset[off];
      if (l == kNoOffset) {
        EXPECT_TRUE(n.left_link().null());
        EXPECT_TRUE(n.right_link().null());
      } else {
        EXPECT_EQ(n.left_link().slot(), base + l);
        EXPECT_EQ(n.right_link().slot(), base + t.right_child_offset[off]);
      }
      EXPECT_EQ(n.tid, off == 0 ? d->id() : 0u);
    }
  }
  // Height 7 splits into a height-3 top tree at slots 0..6: the root alone,
  // then the bottoms {1,3,4} and {2,5,6}.
  EXPECT_EQ(d->root()->left_link().slot(), d->root() + 1);
  EXPECT_EQ(d->root()->right_link().slot(), d->root() + 4);
  EXPECT_EQ(d->opcount(), 0);
  EXPECT_EQ(d->countnode(), 0);
  EXPECT_EQ(d->bcount(), 0);
  EXPECT_FALSE(d->locked());
}

TEST(DeltaNode, SingleSlotContainer) {
  auto d = allocate_delta_node(DeltaParams::make(1, 1));
  EXPECT_EQ(d->all_slots().size(), 2u);
  EXPECT_TRUE(d->root()->left_link().null());
  EXPECT_TRUE(d->root()->right_link().null());
  EXPECT_TRUE(d->last_level(*d->root()));
}

TEST(DeltaNode, DistinctIds) {
  const DeltaParams p = DeltaParams::make(7, 2);
  auto a = allocate_delta_node(p);
  auto b = allocate_delta_node(p);
  EXPECT_NE(a->id(), b->id());
  EXPECT_GE(a->id(), 1u);
  EXPECT_EQ(a->root()->tid, a->id());
  EXPECT_EQ(b->root()->tid, b->id());
}

TEST(DeltaNode, Density) {
  auto d = allocate_delta_node(DeltaParams::make(127, 16));
  EXPECT_DOUBLE_EQ(density(*d), 0.0);
  d->set_counts(64, 0);
  EXPECT_NEAR(density(*d), 64.0 / 127.0, 1e-12);
  d->set_counts(130, 3);
  EXPECT_NEAR(density(*d), 130.0 / 127.0, 1e-12);
}

TEST(DeltaNode, BufferBasics) {
  auto d = allocate_delta_node(DeltaParams::make(15, 3));
  EXPECT_EQ(d->buffer_put(5), PutResult::kInserted);
  EXPECT_EQ(d->bcount(), 1);
  EXPECT_EQ(d->countnode(), 1);
  EXPECT_EQ(d->buffer_put(5), PutResult::kPresent);
  EXPECT_EQ(d->buffer_put(7), PutResult::kInserted);
  EXPECT_EQ(d->buffer_put(3), PutResult::kInserted);
  EXPECT_EQ(d->buffer_put(9), PutResult::kFull);
  EXPECT_TRUE(d->buffer_find(3));
  EXPECT_FALSE(d->buffer_find(9));
  EXPECT_TRUE(d->buffer_remove(5));
  EXPECT_FALSE(d->buffer_remove(5));
  EXPECT_FALSE(d->buffer_remove(9));
  EXPECT_EQ(d->bcount(), 2);
  EXPECT_EQ(d->countnode(), 2);
  // The freed cell is reused; the scan reports cells read.
  EXPECT_EQ(d->buffer_put(9), PutResult::kInserted);
  std::uint32_t scanned = 0;
  EXPECT_TRUE(d->buffer_find(d->active_half(), 9, &scanned));
  EXPECT_EQ(scanned, 1u);
  EXPECT_FALSE(d->buffer_find(d->active_half(), 11, &scanned));
  EXPECT_EQ(scanned, 3u);
}

TEST(DeltaNode, BuffersFollowHalfSwitch) {
  auto d = allocate_delta_node(DeltaParams::make(15, 3));
  EXPECT_EQ(d->buffer_put(5), PutResult::kInserted);
  d->switch_halves();
  EXPECT_EQ(d->active_half(), 1u);
  EXPECT_FALSE(d->buffer_find(5));
  EXPECT_TRUE(d->buffer_find(0, 5));
  EXPECT_EQ(d->root(), d->half_base(1));
}

TEST(DeltaNode, ConcurrentRemoveSameKeyOnce) {
  for (int round = 0; round < 200; ++round) {
    auto d = allocate_delta_node(DeltaParams::make(15, 4));
    ASSERT_EQ(d->buffer_put(3), PutResult::kInserted);
    std::atomic<int> wins{0};
    std::vector<std::thread> ts;
    for (int t = 0; t < 4; ++t) {
      ts.emplace_back([&] { wins += d->buffer_remove(3); });
    }
    for (auto& t : ts) t.join();
    EXPECT_EQ(wins.load(), 1);
    EXPECT_EQ(d->bcount(), 0);
  }
}

TEST(DeltaNode, ConcurrentPutSameKeyOnce) {
  for (int round = 0; round < 200; ++round) {
    auto d = allocate_delta_node(DeltaParams::make(15, 4));
    std::atomic<int> wins{0};
    std::vector<std::thread> ts;
    for (int t = 0; t < 4; ++t) {
      ts.emplace_back([&] { wins += d->buffer_put(9) == PutResult::kInserted; });
    }
    for (auto& t : ts) t.join();
    EXPECT_EQ(wins.load(), 1);
    int cells = 0;
    for (const auto& c : d->active_buffer()) cells += c.load() == 9;
    EXPECT_EQ(cells, 1);
  }
}

TEST(DeltaNode, LockAndOpcount) {
  auto d = allocate_delta_node(DeltaParams::make(7, 2));
  EXPECT_TRUE(d->try_lock());
  EXPECT_FALSE(d->try_lock());
  d->unlock();
  d->wait_and_check();
  EXPECT_EQ(d->opcount(), 1);
  d->flag_down();
  EXPECT_EQ(d->opcount(), 0);
  d->spin_wait_drained();
}

TEST(DeltaNode, WaitAndCheckBlocksWhileLocked) {
  auto d = allocate_delta_node(DeltaParams::make(7, 2));
  d->lock();
  std::atomic<bool> entered{false};
  std::thread t([&] {
    d->wait_and_check();
    entered = true;
    d->flag_down();
  });
  for (int i = 0; i < 1000; ++i) std::this_thread::yield();
  EXPECT_FALSE(entered.load());
  d->unlock();
  t.join();
  EXPECT_TRUE(entered.load());
}
