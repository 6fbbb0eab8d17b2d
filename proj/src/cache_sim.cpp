#include "deltatree/cache_sim.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <unordered_set>

namespace deltatree {

std::uint64_t MemoryMap::address(const DeltaNode& d, const Node* slot) const {
  const auto it = index_.find(&d);
  if (it == index_.end()) throw std::out_of_range("ΔNode not in memory map");
  return allocations[it->second].base + d.slot_index(slot) * node_size;
}

std::uint64_t TransferTrace::transfers() const {
  return std::unordered_set<std::uint64_t>(block_ids.begin(), block_ids.end()).size();
}

MemoryMap snapshot_memory_map(const Tree& tree) {
  MemoryMap map;
  std::uint64_t next = 0;
  tree.for_each_delta([&](const DeltaNode& d) {
    const std::uint64_t extent = 2 * d.params().ub * map.node_size;
    if (!d.retired()) {
      map.index_[&d] = map.allocations.size();
      map.allocations.push_back({d.id(), next, extent});
    }
    // Retired ranges stay reserved so survivors keep their addresses.
    next += extent;
  });
  return map;
}

TransferTrace trace_search(const Tree& tree, const MemoryMap& map, Key v,
                           std::uint64_t block_bytes) {
  if (block_bytes < map.node_size) throw std::invalid_argument("block smaller than a node slot");
  TransferTrace trace;
  trace.block_bytes = block_bytes;
  const DeltaNode* d = &tree.root_delta();
  const Node* p = d->root();
  for (;;) {
    trace.block_ids.push_back(map.address(*d, p) / block_bytes);
    const SlotState s = p->load();
    if (s.is_leaf()) break;
    const Link next = s.value() > v ? p->left_link() : p->right_link();
    if (next.is_delta()) {
      d = next.delta();
      p = d->root();
    } else {
      p = next.slot();
    }
  }
  return trace;
}

std::uint64_t count_search_transfers(const Tree& tree, const MemoryMap& map, Key v,
                                     std::uint64_t block_bytes) {
  return trace_search(tree, map, v, block_bytes).transfers();
}

double transfer_bound(std::uint64_t n, std::uint64_t block_nodes) {
  const double lb = std::log2(static_cast<double>(block_nodes) + 1.0);
  return 4.0 * (std::log2(static_cast<double>(n)) / lb + 1.0 / lb);
}

CurveFit fit_transfer_curve(const std::vector<std::pair<std::uint64_t, double>>& samples) {
  std::set<std::uint64_t> distinct;
  for (const auto& s : samples) distinct.insert(s.first);
  if (distinct.size() < 3) throw std::invalid_argument("need at least 3 distinct block sizes");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(samples.size());
  for (const auto& [b, y] : samples) {
    const double x = 1.0 / std::log2(static_cast<double>(b) + 1.0);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (std::abs(den) < 1e-12) throw std::invalid_argument("degenerate samples");
  CurveFit fit;
  fit.slope = (n * sxy - sx * sy) / den;
  fit.intercept = (sy - fit.slope * sx) / n;
  fit.mean = sy / n;
  double ss = 0;
  for (const auto& [b, y] : samples) {
    const double x = 1.0 / std::log2(static_cast<double>(b) + 1.0);
    const double e = y - (fit.slope * x + fit.intercept);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

std::vector<SweepRow> transfer_sweep(const Tree& tree, std::uint64_t n,
                                     const std::vector<std::uint64_t>& block_nodes,
                                     const std::vector<Key>& keys) {
  if (keys.empty()) throw std::invalid_argument("no search keys");
  const MemoryMap map = snapshot_memory_map(tree);
  std::vector<SweepRow> rows;
  std::vector<double> counts(keys.size());
  for (const std::uint64_t b : block_nodes) {
    double sum = 0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      counts[i] = static_cast<double>(count_search_transfers(tree, map, keys[i], b * map.node_size));
      sum += counts[i];
    }
    std::sort(counts.begin(), counts.end());
    const std::size_t rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(counts.size())));
    SweepRow row;
    row.block_nodes = b;
    row.n = n;
    row.mean_transfers = sum / static_cast<double>(keys.size());
    row.p99_transfers = counts[std::max<std::size_t>(rank, 1) - 1];
    row.bound_value = transfer_bound(n, b);
    rows.push_back(row);
  }
  return rows;
}

std::vector<Key> build_random_tree(Tree& tree, std::uint64_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Key> key(1, Key{1} << 40);
  std::unordered_set<Key> seen;
  std::vector<Key> keys;
  keys.reserve(n);
  while (keys.size() < n) {
    const Key k = key(rng);
    if (seen.insert(k).second) keys.push_back(k);
  }
  for (const Key k : keys) tree.insert(k);
  return keys;
}

std::vector<Key> sample_keys(const std::vector<Key>& keys, std::size_t count, std::uint64_t seed) {
  if (keys.empty()) throw std::invalid_argument("no keys to sample");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, keys.size() - 1);
  std::vector<Key> out(count);
  for (auto& k : out) k = keys[pick(rng)];
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "B_nodes,N,mean_transfers,p99_transfers,bound_value\n";
  for (const auto& r : rows) {
    out << r.block_nodes << ',' << r.n << ',' << r.mean_transfers << ',' << r.p99_transfers << ','
        << r.bound_value << '\n';
  }
}

}  // namespace deltatree
