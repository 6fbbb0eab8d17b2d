#include <gtest/gtest.h>

#include <random>
#include <set>
#include <stdexcept>
#include <type_traits>

#include "deltatree/tree.hpp"

using namespace deltatree;

namespace {

TreeConfig small_config(std::uint64_t ub, std::uint32_t cap) {
  TreeConfig c;
  c.ub = ub;
  c.buffer_capacity = cap;
  return c;
}

}  // namespace

TEST(Tree, EmptySearch) {
  Tree t;
  EXPECT_FALSE(t.search(5));
  EXPECT_EQ(t.size_estimate(), 0);
  EXPECT_EQ(t.check_invariants(), "");
}

TEST(Tree, InsertSearchDelete) {
  Tree t;
  EXPECT_TRUE(t.insert(5));
  EXPECT_FALSE(t.insert(5));
  EXPECT_TRUE(t.search(5));
  EXPECT_TRUE(t.remove(5));
  EXPECT_FALSE(t.remove(5));
  EXPECT_FALSE(t.search(5));
  EXPECT_FALSE(t.remove(9));
  EXPECT_TRUE(t.insert(5));
  EXPECT_TRUE(t.search(5));
  EXPECT_EQ(t.check_invariants(), "");
}

TEST(Tree, GrowMakesThreeNodeSubtree) {
  Tree t;
  t.insert(3);
  t.insert(5);
  const Node* root = t.root_delta().root();
  const SlotState s = root->load();
  ASSERT_FALSE(s.is_leaf());
  EXPECT_EQ(s.value(), 5u);
  EXPECT_EQ(root->left_link().slot()->load(), SlotState::leaf(3));
  EXPECT_EQ(root->right_link().slot()->load(), SlotState::leaf(5));
}

TEST(Tree, GrowKeepsMarkOfDisplacedLeaf) {
  Tree t;
  t.insert(5);
  t.remove(5);
  t.insert(3);
  EXPECT_FALSE(t.search(5));
  EXPECT_TRUE(t.search(3));
  EXPECT_EQ(t.live_keys(), (std::vector<Key>{3}));
  EXPECT_TRUE(t.insert(5));
  EXPECT_EQ(t.live_keys(), (std::vector<Key>{3, 5}));
}

TEST(Tree, RejectsReservedAndOversizedKeys) {
  Tree t;
  EXPECT_THROW(t.insert(0), std::out_of_range);
  EXPECT_THROW(t.search(kMaxKey + 1), std::out_of_range);
  EXPECT_TRUE(t.insert(kMaxKey));
  EXPECT_TRUE(t.search(kMaxKey));
}

TEST(Tree, RejectsBadConfig) {
  EXPECT_THROW(Tree(small_config(1, 1)), std::invalid_argument);
  EXPECT_THROW(Tree(small_config(100, 1)), std::invalid_argument);
  EXPECT_THROW(Tree(small_config(7, 4)), std::invalid_argument);
  EXPECT_THROW(Tree(small_config(127, 0)), std::invalid_argument);
  TreeConfig c;
  c.thresholds.expand_density = 0;
  EXPECT_THROW(Tree{c}, std::invalid_argument);
}

TEST(Tree, SearchIsConstAndLockFree) {
  static_assert(std::is_invocable_r_v<OpResult, decltype(&Tree::search_traced), const Tree&, Key>);
  Tree t;
  t.insert(1);
  const Tree& ct = t;
  EXPECT_TRUE(ct.search(1));
}

TEST(Tree, AscendingInsertsExpandDownward) {
  Tree t(small_config(7, 3));
  for (Key k = 1; k <= 500; ++k) ASSERT_TRUE(t.insert(k));
  for (Key k = 1; k <= 500; ++k) ASSERT_TRUE(t.search(k)) << k;
  EXPECT_FALSE(t.search(501));
  EXPECT_GT(t.delta_count(), 1u);
  EXPECT_EQ(t.check_invariants(), "");
  EXPECT_EQ(t.size_estimate(), 500);
  EXPECT_LE(t.height(), t.height_bound());
}

TEST(Tree, DrainToEmpty) {
  Tree t(small_config(15, 3));
  std::mt19937_64 rng(3);
  std::vector<Key> keys;
  for (Key k = 1; k <= 2000; ++k) keys.push_back(k * 7);
  std::shuffle(keys.begin(), keys.end(), rng);
  for (Key k : keys) t.insert(k);
  std::shuffle(keys.begin(), keys.end(), rng);
  for (Key k : keys) ASSERT_TRUE(t.remove(k));
  EXPECT_TRUE(t.live_keys().empty());
  EXPECT_EQ(t.size_estimate(), 0);
  EXPECT_GT(t.stats().merges, 0u);
  EXPECT_EQ(t.check_invariants(), "");
}

class SequentialDifferential : public ::testing::TestWithParam<std::tuple<std::uint64_t, std::uint32_t>> {};

TEST_P(SequentialDifferential, MatchesSortedSet) {
  const auto [ub, cap] = GetParam();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Tree t(small_config(ub, cap));
    std::set<Key> ref;
    std::mt19937_64 rng(seed * 7919 + ub);
    std::uniform_int_distribution<Key> key(1, 600);
    std::uniform_int_distribution<int> kind(0, 2);
    for (int i = 0; i < 10'000; ++i) {
      const Key k = key(rng);
      switch (kind(rng)) {
        case 0: ASSERT_EQ(t.insert(k), ref.insert(k).second) << "insert " << k << " op " << i; break;
        case 1: ASSERT_EQ(t.remove(k), ref.erase(k) > 0) << "delete " << k << " op " << i; break;
        default: ASSERT_EQ(t.search(k), ref.count(k) > 0) << "search " << k << " op " << i; break;
      }
    }
    EXPECT_EQ(t.live_keys(), std::vector<Key>(ref.begin(), ref.end()));
    EXPECT_EQ(t.check_invariants(), "");
    EXPECT_EQ(t.size_estimate(), static_cast<std::int64_t>(ref.size()));
  }
}

INSTANTIATE_TEST_SUITE_P(Shapes, SequentialDifferential,
                         ::testing::Values(std::make_tuple(3, 1), std::make_tuple(7, 3),
                                           std::make_tuple(15, 2), std::make_tuple(127, 16),
                                           std::make_tuple(1023, 16)));

TEST(Tree, QuarterExpandThresholdAlsoCorrect) {
  TreeConfig c = small_config(31, 4);
  c.thresholds.expand_density = 0.25;
  Tree t(c);
  std::set<Key> ref;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<Key> key(1, 3000);
  for (int i = 0; i < 20'000; ++i) {
    const Key k = key(rng);
    if (rng() % 3) {
      ASSERT_EQ(t.insert(k), ref.insert(k).second);
    } else {
      ASSERT_EQ(t.remove(k), ref.erase(k) > 0);
    }
  }
  EXPECT_EQ(t.live_keys(), std::vector<Key>(ref.begin(), ref.end()));
  EXPECT_EQ(t.check_invariants(), "");
}

TEST(Tree, SearchPathWithinHeightPlusBuffer) {
  Tree t(small_config(15, 4));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 5000; ++i) t.insert(rng() % 100'000 + 1);
  const std::uint64_t limit = t.height() + t.params().buffer_capacity;
  for (int i = 0; i < 5000; ++i) {
    const OpResult r = t.search_traced(rng() % 100'000 + 1);
    ASSERT_LE(r.path_steps, limit);
  }
}

TEST(Tree, MaintenanceDisabledOverflowsIntoBuffer) {
  TreeConfig c = small_config(7, 3);
  c.maintenance_enabled = false;
  Tree t(c);
  // Height-3 ΔNode: four leaves at the last level, then three buffer cells.
  for (Key k : {20, 10, 5, 25}) ASSERT_TRUE(t.insert(k));
  for (Key k : {26, 27, 28}) ASSERT_TRUE(t.insert(k));
  for (Key k : {5, 10, 20, 25, 26, 27, 28}) EXPECT_TRUE(t.search(k));
  EXPECT_FALSE(t.insert(27));
  EXPECT_EQ(t.root_delta().bcount(), 3);
  EXPECT_THROW(t.insert(29), std::length_error);
  EXPECT_EQ(t.stats().rebalances + t.stats().expands, 0u);
}
