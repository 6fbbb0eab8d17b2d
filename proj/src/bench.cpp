#include "deltatree/bench.hpp"

#include <algorithm>
#include <chrono>
#include <latch>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>
#include <unordered_set>

namespace deltatree {

namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

using Clock = std::chrono::steady_clock;

double seconds_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

void WorkloadConfig::validate() const {
  if (threads == 0) throw std::invalid_argument("threads must be positive");
  if (update_ratio > 100) throw std::invalid_argument("update ratio must be within 0..100");
  if (key_range == 0 || key_range > kMaxKey) throw std::invalid_argument("bad key range");
  if (prefill >= key_range) throw std::invalid_argument("prefill must be below the key range");
}

std::vector<Key> prefill_keys(const WorkloadConfig& cfg) {
  auto rng = stream_rng(cfg.seed, ~std::uint64_t{0});
  std::uniform_int_distribution<Key> key(1, cfg.key_range);
  std::unordered_set<Key> seen;
  std::vector<Key> out;
  out.reserve(cfg.prefill);
  while (out.size() < cfg.prefill) {
    const Key k = key(rng);
    if (seen.insert(k).second) out.push_back(k);
  }
  return out;
}

std::vector<Op> generate_ops(const WorkloadConfig& cfg, std::uint32_t tid) {
  const std::uint64_t share = cfg.rep / cfg.threads + (tid < cfg.rep % cfg.threads ? 1 : 0);
  auto rng = stream_rng(cfg.seed, tid);
  std::uniform_int_distribution<Key> key(1, cfg.key_range);
  std::uniform_int_distribution<std::uint32_t> pct(0, 99);
  std::bernoulli_distribution coin(0.5);
  std::vector<Op> ops;
  ops.reserve(share);
  for (std::uint64_t i = 0; i < share; ++i) {
    Op op;
    if (pct(rng) < cfg.update_ratio) {
      op.kind = coin(rng) ? OpKind::kInsert : OpKind::kDelete;
    } else {
      op.kind = OpKind::kSearch;
    }
    op.key = key(rng);
    ops.push_back(op);
  }
  return ops;
}

RunReport run_workload(const WorkloadConfig& cfg, Tree& tree) {
  cfg.validate();
  for (const Key k : prefill_keys(cfg)) tree.insert(k);

  std::vector<std::vector<Op>> streams;
  for (std::uint32_t t = 0; t < cfg.threads; ++t) streams.push_back(generate_ops(cfg, t));

  struct Tally {
    std::uint64_t searches = 0, attempted = 0, succeeded = 0;
    double seconds = 0;
  };
  std::vector<Tally> tally(cfg.threads);
  std::latch ready(cfg.threads + 1);
  std::latch go(1);
  std::vector<std::thread> workers;
  for (std::uint32_t t = 0; t < cfg.threads; ++t) {
    workers.emplace_back([&, t] {
      Tally local;
      ready.count_down();
      go.wait();
      const auto start = Clock::now();
      for (const Op& op : streams[t]) {
        switch (op.kind) {
          case OpKind::kSearch:
            tree.search(op.key);
            ++local.searches;
            break;
          case OpKind::kInsert:
            ++local.attempted;
            local.succeeded += tree.insert(op.key);
            break;
          case OpKind::kDelete:
            ++local.attempted;
            local.succeeded += tree.remove(op.key);
            break;
        }
      }
      local.seconds = seconds_between(start, Clock::now());
      tally[t] = local;
    });
  }
  ready.arrive_and_wait();
  const auto start = Clock::now();
  go.count_down();
  for (auto& w : workers) w.join();
  const double wall = seconds_between(start, Clock::now());

  RunReport rep;
  rep.seconds = wall;
  for (const Tally& t : tally) {
    rep.searches += t.searches;
    rep.updates_attempted += t.attempted;
    rep.updates_succeeded += t.succeeded;
    rep.thread_seconds.push_back(t.seconds);
  }
  if (wall > 0) {
    rep.search_ops_per_s = static_cast<double>(rep.searches) / wall;
    rep.update_ops_per_s = static_cast<double>(rep.updates_succeeded) / wall;
  }
  rep.maintenance = tree.stats();
  return rep;
}

RunReport run_workload(const WorkloadConfig& cfg) {
  cfg.validate();
  TreeConfig tc;
  tc.ub = cfg.ub;
  tc.buffer_capacity = cfg.buffer_capacity;
  Tree tree(tc);
  return run_workload(cfg, tree);
}

std::vector<SweepResult> sweep(const std::vector<WorkloadConfig>& cfgs) {
  if (cfgs.empty()) throw std::invalid_argument("empty sweep");
  std::vector<SweepResult> out;
  for (const auto& c : cfgs) out.push_back({c, run_workload(c)});
  return out;
}

std::vector<WorkloadConfig> full_sweep(const WorkloadConfig& base, std::uint32_t max_threads) {
  std::vector<WorkloadConfig> cfgs;
  for (const std::uint64_t ub : {127u, 1023u, 4095u}) {
    for (const std::uint64_t prefill : {1023u, 250'000u}) {
      for (const std::uint32_t u : {0u, 1u, 3u, 5u, 10u, 20u, 100u}) {
        for (std::uint32_t t = 1; t <= std::max(1u, max_threads); ++t) {
          WorkloadConfig c = base;
          c.ub = ub;
          c.prefill = prefill;
          c.update_ratio = u;
          c.threads = t;
          cfgs.push_back(c);
        }
      }
    }
  }
  return cfgs;
}

void write_bench_csv_header(std::ostream& out) {
  out << "u,threads,prefill,UB,search_ops_s,update_ops_s,rebalances,expands,merges\n";
}

void write_bench_csv_row(std::ostream& out, const SweepResult& r) {
  out << r.cfg.update_ratio << ',' << r.cfg.threads << ',' << r.cfg.prefill << ',' << r.cfg.ub
      << ',' << r.report.search_ops_per_s << ',' << r.report.update_ops_per_s << ','
      << r.report.maintenance.rebalances << ',' << r.report.maintenance.expands << ','
      << r.report.maintenance.merges << '\n';
}

}  // namespace deltatree
