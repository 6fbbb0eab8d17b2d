#include "deltatree/oracle.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace deltatree {

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::kInsert: return "insert";
    case OpKind::kDelete: return "delete";
    case OpKind::kSearch: return "search";
  }
  return "?";
}

OpKind parse_op_kind(const std::string& s) {
  if (s == "insert") return OpKind::kInsert;
  if (s == "delete") return OpKind::kDelete;
  if (s == "search") return OpKind::kSearch;
  throw std::invalid_argument("unknown op kind: " + s);
}

namespace {

bool apply(std::set<Key>& s, OpKind k, Key v) {
  switch (k) {
    case OpKind::kInsert: return s.insert(v).second;
    case OpKind::kDelete: return s.erase(v) > 0;
    case OpKind::kSearch: return s.count(v) > 0;
  }
  return false;
}

class Checker {
 public:
  explicit Checker(const std::vector<HistoryEvent>& h) : h_(h) {}

  bool run() { return dfs(0); }

 private:
  bool dfs(std::uint32_t done) {
    const std::uint32_t all = h_.size() == 32 ? ~0u : ((1u << h_.size()) - 1);
    if (done == all) return true;
    if (!seen_.insert(memo_key(done)).second) return false;
    std::uint64_t min_res = ~std::uint64_t{0};
    for (std::size_t i = 0; i < h_.size(); ++i) {
      if (!(done >> i & 1u)) min_res = std::min(min_res, h_[i].res_ns);
    }
    for (std::size_t i = 0; i < h_.size(); ++i) {
      if (done >> i & 1u) continue;
      const HistoryEvent& e = h_[i];
      // Some pending event responded before e was invoked: e cannot go next.
      if (e.inv_ns > min_res) continue;
      const bool had = state_.count(e.key) > 0;
      if (apply(state_, e.op, e.key) != e.result) {
        undo(e, had);
        continue;
      }
      if (dfs(done | (1u << i))) return true;
      undo(e, had);
    }
    return false;
  }

  void undo(const HistoryEvent& e, bool had) {
    if (had) {
      state_.insert(e.key);
    } else {
      state_.erase(e.key);
    }
  }

  std::string memo_key(std::uint32_t done) const {
    std::string k(reinterpret_cast<const char*>(&done), sizeof done);
    for (const Key v : state_) k.append(reinterpret_cast<const char*>(&v), sizeof v);
    return k;
  }

  const std::vector<HistoryEvent>& h_;
  std::set<Key> state_;
  std::unordered_set<std::string> seen_;
};

}  // namespace

std::vector<bool> sequential_apply(const std::vector<Op>& ops) {
  std::set<Key> s;
  std::vector<bool> out;
  out.reserve(ops.size());
  for (const Op& op : ops) {
    if (op.key == kEmpty) throw std::invalid_argument("key 0 is reserved");
    out.push_back(apply(s, op.kind, op.key));
  }
  return out;
}

bool check_linearizable(const std::vector<HistoryEvent>& h) {
  if (h.size() > kMaxHistoryEvents) throw std::invalid_argument("history longer than 32 events");
  for (const auto& e : h) {
    if (e.res_ns < e.inv_ns) throw std::invalid_argument("response precedes invocation");
  }
  return Checker(h).run();
}

std::string to_text(const std::vector<HistoryEvent>& h) {
  std::ostringstream out;
  for (const auto& e : h) {
    out << e.tid << ' ' << to_string(e.op) << ' ' << e.key << ' ' << e.inv_ns << ' ' << e.res_ns
        << ' ' << (e.result ? "true" : "false") << '\n';
  }
  return out.str();
}

std::vector<HistoryEvent> parse_history(const std::string& text) {
  std::vector<HistoryEvent> h;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    HistoryEvent e;
    std::string op, result;
    if (!(ls >> e.tid >> op >> e.key >> e.inv_ns >> e.res_ns >> result)) {
      throw std::invalid_argument("malformed history line: " + line);
    }
    e.op = parse_op_kind(op);
    if (result == "true" || result == "1") {
      e.result = true;
    } else if (result == "false" || result == "0") {
      e.result = false;
    } else {
      throw std::invalid_argument("malformed result: " + result);
    }
    h.push_back(e);
  }
  return h;
}

HistoryRecorder::HistoryRecorder(std::uint32_t threads) : per_thread_(threads) {}

std::uint64_t HistoryRecorder::now_ns() {
  return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                        std::chrono::steady_clock::now().time_since_epoch())
                                        .count());
}

std::vector<HistoryEvent> HistoryRecorder::events() const {
  std::vector<HistoryEvent> all;
  for (const auto& v : per_thread_) all.insert(all.end(), v.begin(), v.end());
  std::sort(all.begin(), all.end(),
            [](const HistoryEvent& a, const HistoryEvent& b) { return a.inv_ns < b.inv_ns; });
  return all;
}

}  // namespace deltatree
