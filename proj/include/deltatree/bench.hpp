#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "deltatree/oracle.hpp"
#include "deltatree/tree.hpp"

namespace deltatree {

struct WorkloadConfig {
  std::uint64_t rep = 1'000'000;
  std::uint32_t update_ratio = 10;  // percent
  std::uint32_t threads = 1;
  std::uint64_t prefill = 1023;
  std::uint64_t key_range = 500'000;
  std::uint64_t seed = 42;
  std::uint64_t ub = 127;
  std::uint32_t buffer_capacity = 16;

  /// Throws std::invalid_argument on an unusable configuration.
  void validate() const;
};

struct RunReport {
  double search_ops_per_s = 0;  // attempted searches
  double update_ops_per_s = 0;  // successful inserts and deletes
  std::uint64_t searches = 0;
  std::uint64_t updates_attempted = 0;
  std::uint64_t updates_succeeded = 0;
  double seconds = 0;
  std::vector<double> thread_seconds;
  MaintenanceStats maintenance;
};

/// Distinct keys in [1, key_range] used to fill the tree before timing.
std::vector<Key> prefill_keys(const WorkloadConfig& cfg);

/// The op stream of worker `tid`: deterministic in (seed, tid).
std::vector<Op> generate_ops(const WorkloadConfig& cfg, std::uint32_t tid);

/// Prefills `tree`, runs all workers, and reports throughput.
RunReport run_workload(const WorkloadConfig& cfg, Tree& tree);
/// Same on a fresh tree built from cfg.ub and cfg.buffer_capacity.
RunReport run_workload(const WorkloadConfig& cfg);

struct SweepResult {
  WorkloadConfig cfg;
  RunReport report;
};

std::vector<SweepResult> sweep(const std::vector<WorkloadConfig>& cfgs);

/// Update ratios {0,1,3,5,10,20,100} x threads 1..max_threads x prefill
/// {1023, 250000} x UB {127, 1023, 4095}, all other fields from `base`.
std::vector<WorkloadConfig> full_sweep(const WorkloadConfig& base, std::uint32_t max_threads);

void write_bench_csv_header(std::ostream& out);
void write_bench_csv_row(std::ostream& out, const SweepResult& r);

}  // namespace deltatree
