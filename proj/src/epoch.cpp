#include "deltatree/epoch.hpp"

#include <random>
#include <stdexcept>

namespace deltatree {

namespace {
thread_local std::uint32_t tl_depth = 0;
}

struct SlotOwner {
  std::uint32_t index = EpochRegistry::kMaxReaders;

  ~SlotOwner() {
    if (index == EpochRegistry::kMaxReaders) return;
    auto& reg = EpochRegistry::instance();
    reg.slots_[index].announced.store(EpochRegistry::kIdle, std::memory_order_release);
    reg.claimed_[index].store(false, std::memory_order_release);
  }

  EpochRegistry::Slot& get() {
    auto& reg = EpochRegistry::instance();
    if (index == EpochRegistry::kMaxReaders) {
      for (std::uint32_t i = 0; i < EpochRegistry::kMaxReaders; ++i) {
        bool expected = false;
        if (!reg.claimed_[i].load(std::memory_order_relaxed) &&
            reg.claimed_[i].compare_exchange_strong(expected, true)) {
          index = i;
          break;
        }
      }
      if (index == EpochRegistry::kMaxReaders) {
        throw std::runtime_error("too many concurrent reader threads");
      }
    }
    return reg.slots_[index];
  }
};

namespace {
thread_local SlotOwner tl_owner;
}

EpochRegistry& EpochRegistry::instance() {
  static EpochRegistry reg;
  return reg;
}

EpochRegistry::Slot& EpochRegistry::local_slot() { return tl_owner.get(); }

void EpochRegistry::synchronize() {
  std::atomic_thread_fence(std::memory_order_seq_cst);
  const std::uint64_t target = epoch_.fetch_add(1, std::memory_order_seq_cst) + 1;
  std::atomic_thread_fence(std::memory_order_seq_cst);
  for (std::uint32_t i = 0; i < kMaxReaders; ++i) {
    if (!claimed_[i].load(std::memory_order_acquire)) continue;
    Backoff backoff;
    for (;;) {
      const std::uint64_t seen = slots_[i].announced.load(std::memory_order_acquire);
      if (seen == kIdle || seen >= target) break;
      backoff.pause();
    }
  }
}

ReadGuard::ReadGuard() : slot_(nullptr), outer_(tl_depth++ == 0) {
  if (!outer_) return;
  auto& reg = EpochRegistry::instance();
  slot_ = &reg.local_slot();
  slot_->announced.store(reg.epoch_.load(std::memory_order_seq_cst), std::memory_order_relaxed);
  std::atomic_thread_fence(std::memory_order_seq_cst);
}

ReadGuard::~ReadGuard() {
  --tl_depth;
  if (outer_) slot_->announced.store(EpochRegistry::kIdle, std::memory_order_release);
}

namespace detail {

std::atomic<bool> g_interleave_chaos{false};

void chaos_yield() {
  thread_local std::minstd_rand rng{std::random_device{}()};
  if (rng() % 4 == 0) std::this_thread::yield();
}

}  // namespace detail

void set_interleave_chaos(bool on) {
  detail::g_interleave_chaos.store(on, std::memory_order_relaxed);
}

}  // namespace deltatree
