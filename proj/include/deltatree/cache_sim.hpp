#pragma once

#include <cstdint>
#include <iosfwd>
#include <unordered_map>
#include <vector>

#include "deltatree/tree.hpp"

namespace deltatree {

inline constexpr std::uint64_t kNodeSize = sizeof(Node);

struct Allocation {
  std::uint32_t delta_id = 0;
  std::uint64_t base = 0;
  std::uint64_t extent = 0;
};

/// Synthetic address layout of the live ΔNodes: each gets one contiguous
/// range, placed back to back in allocation order.
struct MemoryMap {
  std::vector<Allocation> allocations;
  std::uint64_t node_size = kNodeSize;

  /// Address of a slot; throws std::out_of_range for an unmapped ΔNode.
  std::uint64_t address(const DeltaNode& d, const Node* slot) const;

 private:
  friend MemoryMap snapshot_memory_map(const Tree& tree);
  std::unordered_map<const DeltaNode*, std::size_t> index_;
};

struct TransferTrace {
  std::vector<std::uint64_t> block_ids;  // one per visited slot, in path order
  std::uint64_t block_bytes = 0;

  /// Distinct blocks; every distinct block is one cold-cache transfer.
  std::uint64_t transfers() const;
};

/// Requires a quiescent tree.
MemoryMap snapshot_memory_map(const Tree& tree);

/// Replays the descent of search(v) and records the block of every slot.
TransferTrace trace_search(const Tree& tree, const MemoryMap& map, Key v, std::uint64_t block_bytes);

/// Cold-cache transfer count of search(v). Throws std::invalid_argument if
/// block_bytes < map.node_size.
std::uint64_t count_search_transfers(const Tree& tree, const MemoryMap& map, Key v,
                                     std::uint64_t block_bytes);

/// 4 * (log_{B+1} n + log_{B+1} 2), with B in nodes.
double transfer_bound(std::uint64_t n, std::uint64_t block_nodes);

struct CurveFit {
  double slope = 0;
  double intercept = 0;
  double residual = 0;  // root-mean-square deviation of the samples from the line
  double mean = 0;      // mean of the sample transfer values
};

/// Least-squares fit of transfers = slope / log2(B+1) + intercept. Throws
/// std::invalid_argument with fewer than 3 distinct B values.
CurveFit fit_transfer_curve(const std::vector<std::pair<std::uint64_t, double>>& samples);

struct SweepRow {
  std::uint64_t block_nodes = 0;
  std::uint64_t n = 0;
  double mean_transfers = 0;
  double p99_transfers = 0;
  double bound_value = 0;
};

/// Mean and 99th percentile of transfers over `keys` for each block size.
std::vector<SweepRow> transfer_sweep(const Tree& tree, std::uint64_t n,
                                     const std::vector<std::uint64_t>& block_nodes,
                                     const std::vector<Key>& keys);

/// Inserts n distinct keys drawn uniformly from [1, 2^40] in random order and
/// returns them in insertion order.
std::vector<Key> build_random_tree(Tree& tree, std::uint64_t n, std::uint64_t seed);

/// `count` keys drawn uniformly with replacement from `keys`.
std::vector<Key> sample_keys(const std::vector<Key>& keys, std::size_t count, std::uint64_t seed);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace deltatree
