#include "deltatree/veb_layout.hpp"

#include <array>
#include <bit>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace deltatree {

namespace {

// BFS index of the j-th descendant, `levels` below node `bfs`.
std::uint64_t descendant(std::uint64_t bfs, std::uint32_t levels, std::uint64_t j) {
  return ((bfs + 1) << levels) - 1 + j;
}

void place(std::uint64_t root_bfs, std::uint32_t h, Offset& next, std::vector<Offset>& out) {
  if (h == 1) {
    out[root_bfs] = next++;
    return;
  }
  const std::uint32_t top = h / 2;
  const std::uint32_t bottom = h - top;
  place(root_bfs, top, next, out);
  const std::uint64_t fan = std::uint64_t{1} << top;
  for (std::uint64_t j = 0; j < fan; ++j) {
    place(descendant(root_bfs, top, j), bottom, next, out);
  }
}

}  // namespace

LayoutTable build_layout(std::uint32_t height) {
  if (height < 1 || height > 32) {
    throw std::invalid_argument("layout height must be in [1, 32], got " + std::to_string(height));
  }
  const std::uint64_t n = (std::uint64_t{1} << height) - 1;

  LayoutTable t;
  t.height = height;
  t.bfs_to_offset.assign(n, kNoOffset);
  Offset next = 0;
  place(0, height, next, t.bfs_to_offset);

  t.offset_to_bfs.assign(n, 0);
  t.left_child_offset.assign(n, kNoOffset);
  t.right_child_offset.assign(n, kNoOffset);
  t.parent_offset.assign(n, kNoOffset);
  t.depth.assign(n, 0);
  for (std::uint64_t bfs = 0; bfs < n; ++bfs) {
    const Offset off = t.bfs_to_offset[bfs];
    t.offset_to_bfs[off] = static_cast<std::uint32_t>(bfs);
    t.depth[off] = static_cast<std::uint32_t>(std::bit_width(bfs + 1));
    if (2 * bfs + 2 < n) {
      t.left_child_offset[off] = t.bfs_to_offset[2 * bfs + 1];
      t.right_child_offset[off] = t.bfs_to_offset[2 * bfs + 2];
    }
    if (bfs > 0) t.parent_offset[off] = t.bfs_to_offset[(bfs - 1) / 2];
  }
  return t;
}

std::shared_ptr<const LayoutTable> cached_layout(std::uint32_t height) {
  static std::mutex mu;
  static std::array<std::shared_ptr<const LayoutTable>, 33> cache;
  if (height < 1 || height > 32) {
    throw std::invalid_argument("layout height must be in [1, 32], got " + std::to_string(height));
  }
  std::lock_guard lock(mu);
  auto& slot = cache[height];
  if (!slot) slot = std::make_shared<const LayoutTable>(build_layout(height));
  return slot;
}

std::uint32_t delta_height(std::uint64_t ub) {
  if (ub == 0 || ub == ~std::uint64_t{0} || !std::has_single_bit(ub + 1)) {
    throw std::invalid_argument("UB + 1 must be a power of two, got UB = " + std::to_string(ub));
  }
  return static_cast<std::uint32_t>(std::countr_zero(ub + 1));
}

std::size_t blocks_touched(const LayoutTable& layout, std::span<const Offset> path,
                           std::size_t block_nodes) {
  if (block_nodes == 0) throw std::invalid_argument("block size must be positive");
  std::unordered_set<std::size_t> blocks;
  for (Offset off : path) {
    if (off >= layout.size()) throw std::out_of_range("offset outside layout");
    blocks.insert(off / block_nodes);
  }
  return blocks.size();
}

std::vector<Offset> root_to_leaf_path(const LayoutTable& layout, std::uint64_t leaf) {
  const std::uint64_t first_leaf = (std::uint64_t{1} << (layout.height - 1)) - 1;
  std::uint64_t bfs = first_leaf + leaf;
  if (bfs >= layout.size()) throw std::out_of_range("leaf index outside layout");
  std::vector<Offset> path(layout.height);
  for (std::uint32_t i = layout.height; i-- > 0;) {
    path[i] = layout.bfs_to_offset[bfs];
    if (bfs > 0) bfs = (bfs - 1) / 2;
  }
  return path;
}

DeltaParams DeltaParams::make(std::uint64_t ub, std::uint32_t buffer_capacity) {
  if (buffer_capacity < 1) throw std::invalid_argument("buffer capacity must be at least 1");
  DeltaParams p;
  p.height = delta_height(ub);
  p.ub = ub;
  p.buffer_capacity = buffer_capacity;
  return p;
}

}  // namespace deltatree
