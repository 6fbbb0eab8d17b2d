#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace deltatree {

/// Offset of a node slot inside one contiguous van Emde Boas ordered block.
using Offset = std::uint32_t;

inline constexpr Offset kNoOffset = ~Offset{0};

/// Maps a complete binary tree of `height` levels onto van Emde Boas memory
/// order. Positions are BFS indices (root = 0, children of i are 2i+1, 2i+2).
struct LayoutTable {
  std::uint32_t height = 0;
  std::vector<Offset> bfs_to_offset;
  std::vector<std::uint32_t> offset_to_bfs;
  std::vector<Offset> left_child_offset;   // indexed by offset
  std::vector<Offset> right_child_offset;  // indexed by offset
  std::vector<Offset> parent_offset;       // indexed by offset
  std::vector<std::uint32_t> depth;        // 1-based, indexed by offset

  std::size_t size() const { return bfs_to_offset.size(); }
};

/// Builds the vEB order for a complete tree of the given height: a tree of
/// height h is split into a top tree of height floor(h/2) followed by its
/// 2^floor(h/2) bottom trees of height ceil(h/2), each laid out recursively.
/// Throws std::invalid_argument unless 1 <= height <= 32.
LayoutTable build_layout(std::uint32_t height);

/// Immutable, process-wide cached layout for `height`.
std::shared_ptr<const LayoutTable> cached_layout(std::uint32_t height);

/// log2(UB + 1); throws std::invalid_argument unless UB + 1 is a power of two.
std::uint32_t delta_height(std::uint64_t ub);

/// Distinct B-node blocks (offset / B) touched by `path`.
std::size_t blocks_touched(const LayoutTable& layout, std::span<const Offset> path,
                           std::size_t block_nodes);

/// Root-to-leaf offset path following BFS leaf index `leaf` (0 .. 2^(h-1)-1).
std::vector<Offset> root_to_leaf_path(const LayoutTable& layout, std::uint64_t leaf);

/// Capacity and sizing of one ΔNode.
struct DeltaParams {
  std::uint64_t ub = 127;               // node slots per tree half
  std::uint32_t height = 7;             // log2(ub + 1)
  std::uint32_t buffer_capacity = 16;   // overflow cells per half

  /// Validated constructor; throws std::invalid_argument.
  static DeltaParams make(std::uint64_t ub, std::uint32_t buffer_capacity);

  /// Maximum number of keys a leaf-oriented tree of `height` levels holds.
  std::uint64_t leaf_capacity() const { return (ub + 1) / 2; }
};

}  // namespace deltatree
