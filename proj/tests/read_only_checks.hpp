#pragma once

// Compile-time checks that the search path cannot modify shared state. Search
// is a const member that walks const Node / const DeltaNode handles. Through
// those handles no CAS, test-and-set, lock or counter update is callable.

#include <atomic>
#include <type_traits>

#include "deltatree/tree.hpp"

namespace test_support {

using namespace deltatree;

template <typename N>
concept SlotCas = requires(N& n, SlotState s) { n.cas(s, s); };

template <typename D>
concept DeltaWrites = requires(D& d) { d.try_lock(); } || requires(D& d) { d.lock(); } ||
                      requires(D& d) { d.unlock(); } || requires(D& d) { d.flag_up(); } ||
                      requires(D& d) { d.flag_down(); } || requires(D& d, Key k) { d.buffer_put(k); } ||
                      requires(D& d, Key k) { d.buffer_remove(k); } ||
                      requires(D& d) { d.switch_halves(); };

template <typename A>
concept AtomicRmw = requires(A& a, typename std::remove_cv_t<A>::value_type v) {
  a.compare_exchange_strong(v, v);
} || requires(A& a, typename std::remove_cv_t<A>::value_type v) { a.exchange(v); } ||
                    requires(A& a, typename std::remove_cv_t<A>::value_type v) { a.store(v); };

static_assert(SlotCas<Node> && !SlotCas<const Node>);
static_assert(DeltaWrites<DeltaNode> && !DeltaWrites<const DeltaNode>);
static_assert(AtomicRmw<std::atomic<std::uint64_t>> && !AtomicRmw<const std::atomic<std::uint64_t>>);
static_assert(std::is_same_v<decltype(&Tree::search_traced), OpResult (Tree::*)(Key) const>);
static_assert(std::is_same_v<decltype(&Tree::search), bool (Tree::*)(Key) const>);
// Only the const overload of buffer_find exists for this signature.
inline constexpr auto kConstBufferFind =
    static_cast<bool (DeltaNode::*)(std::uint32_t, Key, std::uint32_t*) const>(&DeltaNode::buffer_find);

}  // namespace test_support
