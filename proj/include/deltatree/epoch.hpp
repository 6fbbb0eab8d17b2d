#pragma once

#include <atomic>
#include <cstdint>
#include <thread>

namespace deltatree {

/// Spin helper: busy-waits briefly, then yields the processor. No OS blocking.
class Backoff {
 public:
  void pause() {
    if (spins_ < kSpinLimit) {
      for (std::uint32_t i = 0; i < (1u << spins_); ++i) {
#if defined(__x86_64__) || defined(__i386__)
        __builtin_ia32_pause();
#endif
      }
      ++spins_;
    } else {
      std::this_thread::yield();
    }
  }

 private:
  static constexpr std::uint32_t kSpinLimit = 6;
  std::uint32_t spins_ = 0;
};

namespace detail {

extern std::atomic<bool> g_interleave_chaos;
void chaos_yield();

}  // namespace detail

/// Test hook: when on, every interleaving point of the update and maintenance
/// protocols yields the processor at random, so that stress tests see
/// interleavings even on a single core.
void set_interleave_chaos(bool on);

#define DELTATREE_INTERLEAVE()                                                      \
  do {                                                                              \
    if (::deltatree::detail::g_interleave_chaos.load(std::memory_order_relaxed)) { \
      ::deltatree::detail::chaos_yield();                                           \
    }                                                                               \
  } while (0)

/// Process-wide reader announcements. A reader publishes the epoch it started
/// in; writers that want to recycle memory readers may still be walking bump
/// the epoch and wait until every announced epoch has moved past it.
///
/// Readers only store to their own slot. Each thread claims a slot once on
/// first use and returns it when the thread exits.
class EpochRegistry {
 public:
  static constexpr std::uint32_t kMaxReaders = 512;
  static constexpr std::uint64_t kIdle = ~std::uint64_t{0};

  static EpochRegistry& instance();

  /// Advances the global epoch and spins until no reader that began before
  /// the call is still active.
  void synchronize();

  std::uint64_t current() const { return epoch_.load(std::memory_order_seq_cst); }

  struct alignas(64) Slot {
    std::atomic<std::uint64_t> announced{kIdle};
  };

  Slot& local_slot();

 private:
  EpochRegistry() = default;
  friend class ReadGuard;
  friend struct SlotOwner;

  std::atomic<std::uint64_t> epoch_{1};
  Slot slots_[kMaxReaders];
  std::atomic<bool> claimed_[kMaxReaders] = {};
};

/// RAII read-side critical section. Nested guards on the same thread are
/// allowed; only the outermost one announces.
class ReadGuard {
 public:
  ReadGuard();
  ~ReadGuard();
  ReadGuard(const ReadGuard&) = delete;
  ReadGuard& operator=(const ReadGuard&) = delete;

 private:
  EpochRegistry::Slot* slot_;
  bool outer_;
};

}  // namespace deltatree
