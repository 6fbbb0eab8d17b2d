#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "deltatree/bench.hpp"

using namespace deltatree;

namespace {

WorkloadConfig small(std::uint32_t u, std::uint32_t threads = 1) {
  WorkloadConfig c;
  c.rep = 20'000;
  c.update_ratio = u;
  c.threads = threads;
  c.prefill = 500;
  c.key_range = 5'000;
  return c;
}

}  // namespace

TEST(Workload, PureSearchAndPureUpdate) {
  const RunReport s = run_workload(small(0));
  EXPECT_EQ(s.searches, 20'000u);
  EXPECT_EQ(s.updates_attempted, 0u);
  EXPECT_EQ(s.update_ops_per_s, 0.0);
  const RunReport u = run_workload(small(100));
  EXPECT_EQ(u.searches, 0u);
  EXPECT_EQ(u.updates_attempted, 20'000u);
  EXPECT_GT(u.update_ops_per_s, 0.0);
}

TEST(Workload, UpdateShareTracksRatio) {
  const auto ops = generate_ops(small(10), 0);
  std::size_t updates = 0;
  for (const Op& op : ops) updates += op.kind != OpKind::kSearch;
  EXPECT_NEAR(static_cast<double>(updates) / static_cast<double>(ops.size()), 0.10, 0.01);
}

TEST(Workload, StreamsDeterministicAndDistinctPerThread) {
  const WorkloadConfig c = small(20, 3);
  const auto a = generate_ops(c, 1);
  const auto b = generate_ops(c, 1);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].kind, b[i].kind);
    ASSERT_EQ(a[i].key, b[i].key);
  }
  const auto other = generate_ops(c, 2);
  std::size_t same = 0;
  for (std::size_t i = 0; i < std::min(a.size(), other.size()); ++i) same += a[i].key == other[i].key;
  EXPECT_LT(same, 10u);
  std::size_t total = 0;
  for (std::uint32_t t = 0; t < 3; ++t) total += generate_ops(c, t).size();
  EXPECT_EQ(total, c.rep);
}

TEST(Workload, PrefillKeysDistinctAndInRange) {
  const WorkloadConfig c = small(0);
  const auto keys = prefill_keys(c);
  EXPECT_EQ(keys.size(), c.prefill);
  EXPECT_EQ(std::set<Key>(keys.begin(), keys.end()).size(), keys.size());
  for (Key k : keys) {
    EXPECT_GE(k, 1u);
    EXPECT_LE(k, c.key_range);
  }
}

TEST(Workload, SingleThreadMatchesSequentialModel) {
  for (std::uint32_t u : {5u, 50u, 100u}) {
    WorkloadConfig c = small(u);
    TreeConfig tc;
    tc.ub = 15;
    tc.buffer_capacity = 2;
    Tree tree(tc);
    const RunReport r = run_workload(c, tree);
    std::vector<Op> replay;
    for (Key k : prefill_keys(c)) replay.push_back({OpKind::kInsert, k});
    const std::size_t skip = replay.size();
    const auto ops = generate_ops(c, 0);
    replay.insert(replay.end(), ops.begin(), ops.end());
    const auto results = sequential_apply(replay);
    std::uint64_t succeeded = 0;
    std::set<Key> model;
    for (std::size_t i = 0; i < replay.size(); ++i) {
      if (i >= skip && replay[i].kind != OpKind::kSearch) succeeded += results[i];
      if (replay[i].kind == OpKind::kInsert) model.insert(replay[i].key);
      if (replay[i].kind == OpKind::kDelete) model.erase(replay[i].key);
    }
    EXPECT_EQ(r.updates_succeeded, succeeded) << "u=" << u;
    EXPECT_EQ(tree.live_keys(), std::vector<Key>(model.begin(), model.end()));
    EXPECT_EQ(tree.check_invariants(), "");
  }
}

TEST(Workload, MultiThreadCountsAddUp) {
  const RunReport r = run_workload(small(20, 3));
  EXPECT_EQ(r.searches + r.updates_attempted, 20'000u);
  EXPECT_EQ(r.thread_seconds.size(), 3u);
  EXPECT_LE(r.updates_succeeded, r.updates_attempted);
}

TEST(Workload, ValidateRejectsBadConfigs) {
  WorkloadConfig c = small(10);
  c.threads = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small(101);
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small(10);
  c.prefill = c.key_range;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small(10);
  c.key_range = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Sweep, FullGridSize) {
  const auto cfgs = full_sweep(WorkloadConfig{}, 4);
  EXPECT_EQ(cfgs.size(), 3u * 2u * 7u * 4u);
  EXPECT_EQ(full_sweep(WorkloadConfig{}, 0).size(), 3u * 2u * 7u);
}

TEST(Sweep, CsvRows) {
  WorkloadConfig c = small(10);
  c.rep = 1000;
  const auto results = sweep({c});
  std::ostringstream out;
  write_bench_csv_header(out);
  write_bench_csv_row(out, results[0]);
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "u,threads,prefill,UB,search_ops_s,update_ops_s,rebalances,expands,merges");
  EXPECT_EQ(s.substr(s.find('\n') + 1, 13), "10,1,500,127,");
  EXPECT_THROW(sweep({}), std::invalid_argument);
}
