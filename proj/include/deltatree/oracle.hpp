#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include "deltatree/delta_node.hpp"

namespace deltatree {

enum class OpKind { kInsert, kDelete, kSearch };

const char* to_string(OpKind k);
/// Accepts "insert", "delete" and "search"; throws std::invalid_argument.
OpKind parse_op_kind(const std::string& s);

struct Op {
  OpKind kind = OpKind::kSearch;
  Key key = 0;
};

struct HistoryEvent {
  std::uint32_t tid = 0;
  OpKind op = OpKind::kSearch;
  Key key = 0;
  std::uint64_t inv_ns = 0;
  std::uint64_t res_ns = 0;
  bool result = false;

  friend bool operator==(const HistoryEvent&, const HistoryEvent&) = default;
};

/// Results of replaying `ops` against an ordered-set model starting empty.
std::vector<bool> sequential_apply(const std::vector<Op>& ops);

inline constexpr std::size_t kMaxHistoryEvents = 32;

/// True iff the events admit a total order that respects real-time
/// precedence (a before b when a.res_ns < b.inv_ns) and replays correctly
/// from an empty set. Throws std::invalid_argument for more than 32 events or
/// an event whose response precedes its invocation.
bool check_linearizable(const std::vector<HistoryEvent>& h);

/// One line per event: `tid op key inv_ns res_ns result`.
std::string to_text(const std::vector<HistoryEvent>& h);
/// Inverse of to_text; blank lines and lines starting with '#' are skipped.
std::vector<HistoryEvent> parse_history(const std::string& text);

/// Collects events into per-thread buffers; merge with events() once all
/// recording threads are done.
class HistoryRecorder {
 public:
  explicit HistoryRecorder(std::uint32_t threads);

  static std::uint64_t now_ns();

  /// Times `fn` (which returns the operation's boolean result) and appends
  /// the event to the buffer of `tid`. Only thread `tid` may use that buffer.
  template <typename F>
  bool record(std::uint32_t tid, OpKind op, Key key, F&& fn) {
    const std::uint64_t inv = now_ns();
    const bool result = fn();
    std::uint64_t res = now_ns();
    if (res <= inv) res = inv + 1;
    per_thread_[tid].push_back({tid, op, key, inv, res, result});
    return result;
  }

  /// All events sorted by invocation time.
  std::vector<HistoryEvent> events() const;

 private:
  std::vector<std::vector<HistoryEvent>> per_thread_;
};

}  // namespace deltatree
