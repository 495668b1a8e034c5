#pragma once

// Correctness oracles over histories and replica registers.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "syncframe/core_model.hpp"
#include "syncframe/harness.hpp"

namespace syncframe {

enum class Outcome { Pass, Fail };

struct Verdict {
  Outcome outcome = Outcome::Pass;
  std::string checker;
  std::string witness;
  /// Linearizability passes carry the total order found (request ids).
  std::vector<RequestId> order;

  bool passed() const { return outcome == Outcome::Pass; }
  /// `PASS|FAIL <checker> <witness-summary>`
  std::string to_line() const {
    std::string s = passed() ? "PASS " : "FAIL ";
    s += checker;
    if (!witness.empty()) s += " " + witness;
    return s;
  }

  static Verdict pass(std::string checker, std::string witness = {}) {
    return {Outcome::Pass, std::move(checker), std::move(witness), {}};
  }
  static Verdict fail(std::string checker, std::string witness) {
    if (witness.empty()) throw std::logic_error("failing verdict needs a witness");
    return {Outcome::Fail, std::move(checker), std::move(witness), {}};
  }
};

class TooLarge : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t kMaxLinearizableOps = 12;

/// One client operation as seen by the checker.
struct HistoryOp {
  ClientOp op;
  std::size_t invoke_pos = 0;  // index of the Invoke event in the history
  std::optional<std::size_t> respond_pos;
  std::optional<OpResult> result;
};

inline std::vector<HistoryOp> history_ops(const History& h) {
  std::vector<HistoryOp> ops;
  std::map<RequestId, std::size_t> where;
  const auto& events = h.events();
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (auto* inv = std::get_if<Invoke>(&events[i].event)) {
      where[inv->op.id] = ops.size();
      ops.push_back(HistoryOp{inv->op, i, std::nullopt, std::nullopt});
    } else if (auto* r = std::get_if<Respond>(&events[i].event)) {
      auto& o = ops[where.at(r->id)];
      o.respond_pos = i;
      o.result = r->result;
    }
  }
  return ops;
}

namespace detail {

/// Sequential model of one key: the series of writes applied so far.
struct SeqModel {
  ProjectionKind kind;
  std::vector<WriteOp> series;

  void apply(const ClientOp& op) {
    if (op.kind == OpKind::Read) return;
    if (op.kind == OpKind::Remove) {
      Metadata m;
      std::set<OpId> tags;
      for (const auto& w : series)
        if (!w.value.is_phi() && w.value.bytes() == op.value) tags.insert(w.id());
      m.deps = tags;
      m.logical_time = op.id;
      series.push_back(make_meta_write(op.writer, op.id, m, op.key));
      return;
    }
    series.push_back(make_write(op.writer, op.id, op.key, op.value));
  }

  std::string read() const { return project_series(series, kind).to_string(); }
};

inline bool is_complete(const HistoryOp& o) { return o.respond_pos.has_value(); }

/// `a` must be ordered before `b` in any linearization.
inline bool precedes(const HistoryOp& a, const HistoryOp& b) {
  return a.respond_pos && *a.respond_pos < b.invoke_pos;
}

class LinSearch {
 public:
  LinSearch(std::vector<HistoryOp> ops, ProjectionKind kind) : ops_(std::move(ops)), kind_(kind) {
    for (std::size_t i = 0; i < ops_.size(); ++i)
      if (is_complete(ops_[i])) required_ |= 1u << i;
  }

  std::optional<std::vector<std::size_t>> run() {
    std::vector<std::size_t> order;
    SeqModel model{kind_, {}};
    if (dfs(0, model, order)) return order;
    return std::nullopt;
  }

 private:
  bool dfs(std::uint32_t done, SeqModel& model, std::vector<std::size_t>& order) {
    if ((done & required_) == required_) return true;
    std::string key = std::to_string(done) + "|" + model.read() + "|" + std::to_string(model.series.size());
    if (kind_ == ProjectionKind::LogSequence || kind_ == ProjectionKind::LastWrite)
      key = std::to_string(done) + "|" + model.read();
    if (failed_.contains(key)) return false;
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (done & (1u << i)) continue;
      const HistoryOp& cand = ops_[i];
      bool ready = true;
      for (std::size_t j = 0; j < ops_.size() && ready; ++j)
        if (!(done & (1u << j)) && j != i && precedes(ops_[j], cand)) ready = false;
      if (!ready) continue;
      if (cand.op.kind == OpKind::Read) {
        // A read without a response constrains nothing.
        if (!is_complete(cand)) continue;
        const auto& got = cand.result->read_value;
        if (!got || *got != model.read()) continue;
        order.push_back(i);
        if (dfs(done | (1u << i), model, order)) return true;
        order.pop_back();
      } else {
        SeqModel next = model;
        next.apply(cand.op);
        order.push_back(i);
        if (dfs(done | (1u << i), next, order)) return true;
        order.pop_back();
      }
    }
    failed_.insert(key);
    return false;
  }

  std::vector<HistoryOp> ops_;
  ProjectionKind kind_;
  std::uint32_t required_ = 0;
  std::unordered_set<std::string> failed_;
};

inline std::string op_label(const ClientOp& op) {
  std::string s = std::to_string(op.id) + ":";
  switch (op.kind) {
    case OpKind::Write: return s + "w(" + op.value + ")";
    case OpKind::Remove: return s + "rm(" + op.value + ")";
    case OpKind::Read: return s + "r";
  }
  return s;
}

}  // namespace detail

/// Exhaustive linearizability check of a small history. Keys are independent
/// objects and are checked separately; aborted and unanswered writes may or
/// may not have taken effect.
inline Verdict check_linearizable(const History& history, ProjectionKind projection) {
  const std::string name = "linearizable";
  auto ops = history_ops(history);
  if (ops.size() > kMaxLinearizableOps)
    throw TooLarge("history has " + std::to_string(ops.size()) + " operations; the exhaustive bound is " +
                   std::to_string(kMaxLinearizableOps));

  std::vector<HistoryOp> usable;
  for (auto& o : ops) {
    if (o.result && o.result->status == OpResult::Status::Aborted) o.respond_pos.reset();
    if (o.op.kind == OpKind::Read && o.respond_pos && !o.result->read_value)
      return Verdict::fail(name, "read " + std::to_string(o.op.id) + " returned no value");
    usable.push_back(o);
  }

  if (projection == ProjectionKind::LastWrite) {
    std::set<std::string> written;
    for (const auto& o : usable)
      if (o.op.kind == OpKind::Write) written.insert(o.op.value);
    for (const auto& o : usable)
      if (o.op.kind == OpKind::Read && o.respond_pos && *o.result->read_value != "<empty>" &&
          !written.contains(*o.result->read_value))
        return Verdict::fail(name, "value never written: read " + std::to_string(o.op.id) + " -> " +
                                       *o.result->read_value);
  }

  std::map<std::string, std::vector<HistoryOp>> by_key;
  for (const auto& o : usable) by_key[o.op.key].push_back(o);

  Verdict v = Verdict::pass(name);
  std::string witness = "order=";
  bool first = true;
  for (const auto& [key, key_ops] : by_key) {
    detail::LinSearch search(key_ops, projection);
    auto order = search.run();
    if (!order) {
      std::string ids;
      for (const auto& o : key_ops) ids += (ids.empty() ? "" : ",") + detail::op_label(o.op);
      return Verdict::fail(name, "no linearization of key " + key + " ops [" + ids + "]");
    }
    for (auto i : *order) {
      v.order.push_back(key_ops[i].op.id);
      witness += (first ? "" : ",") + detail::op_label(key_ops[i].op);
      first = false;
    }
  }
  v.witness = witness;
  return v;
}

/// Replays a witness order sequentially; true iff every read in it returns
/// what the history recorded and real-time order is respected.
inline bool replay_witness(const History& history, ProjectionKind projection,
                           const std::vector<RequestId>& order) {
  auto ops = history_ops(history);
  std::map<RequestId, HistoryOp> by_id;
  for (const auto& o : ops) by_id[o.op.id] = o;
  std::map<std::string, detail::SeqModel> models;
  std::set<RequestId> placed;
  for (auto id : order) {
    auto it = by_id.find(id);
    if (it == by_id.end() || !placed.insert(id).second) return false;
    const HistoryOp& o = it->second;
    for (const auto& other : ops)
      if (other.op.key == o.op.key && detail::precedes(other, o) && !placed.contains(other.op.id))
        return false;
    auto& model = models.try_emplace(o.op.key, detail::SeqModel{projection, {}}).first->second;
    if (o.op.kind == OpKind::Read) {
      if (!o.result || !o.result->read_value || *o.result->read_value != model.read()) return false;
    } else {
      model.apply(o.op);
    }
  }
  for (const auto& o : ops)
    if (o.respond_pos && o.result->status == OpResult::Status::Ok && !placed.contains(o.op.id))
      return false;
  return true;
}

/// Strong eventual consistency: replicas that delivered the same updates
/// project the same value, key by key.
inline Verdict check_sec(const std::vector<Register>& replicas,
                         const std::vector<std::set<OpId>>& delivered) {
  const std::string name = "sec";
  if (replicas.size() != delivered.size())
    throw std::invalid_argument("each replica needs its delivered set");
  std::size_t pending = 0;
  for (std::size_t a = 0; a < replicas.size(); ++a) {
    for (std::size_t b = a + 1; b < replicas.size(); ++b) {
      if (delivered[a] != delivered[b]) {
        ++pending;
        continue;
      }
      std::set<std::string> keys = replicas[a].keys();
      auto kb = replicas[b].keys();
      keys.insert(kb.begin(), kb.end());
      for (const auto& k : keys) {
        auto pa = replicas[a].project(k), pb = replicas[b].project(k);
        if (pa != pb)
          return Verdict::fail(name, "replicas " + std::to_string(replicas[a].replica_id()) + "," +
                                         std::to_string(replicas[b].replica_id()) + " key " + k +
                                         ": " + pa.to_string() + " vs " + pb.to_string());
      }
    }
  }
  return Verdict::pass(name, pending ? "pending-delivery pairs=" + std::to_string(pending) : "");
}

/// Delivered update set of each register (every committed write id).
inline std::vector<std::set<OpId>> delivered_sets(const std::vector<Register>& regs) {
  std::vector<std::set<OpId>> out;
  for (const auto& r : regs) {
    std::set<OpId> ids;
    for (const auto& w : r.series()) ids.insert(w.id());
    out.push_back(std::move(ids));
  }
  return out;
}

/// Two live replicas whose per-key series are not prefix-related have
/// settled on different results for the same pass.
inline Verdict detect_split_brain(const std::vector<Register>& registers,
                                  const std::set<WriterId>& live) {
  const std::string name = "split-brain";
  std::vector<const Register*> regs;
  for (const auto& r : registers)
    if (live.contains(r.replica_id())) regs.push_back(&r);
  std::set<std::string> keys;
  for (auto* r : regs) {
    auto k = r->keys();
    keys.insert(k.begin(), k.end());
  }
  for (const auto& key : keys) {
    std::vector<std::vector<WriteOp>> series;
    for (auto* r : regs) series.push_back(r->key_series(key));
    for (std::size_t a = 0; a < regs.size(); ++a) {
      for (std::size_t b = a + 1; b < regs.size(); ++b) {
        const auto& sa = series[a];
        const auto& sb = series[b];
        std::size_t common = std::min(sa.size(), sb.size());
        for (std::size_t i = 0; i < common; ++i) {
          if (sa[i].id() == sb[i].id()) continue;
          std::vector<WriteOp> pa(sa.begin(), sa.begin() + static_cast<std::ptrdiff_t>(i + 1));
          std::vector<WriteOp> pb(sb.begin(), sb.begin() + static_cast<std::ptrdiff_t>(i + 1));
          auto kind = regs[a]->projection_kind();
          return Verdict::fail(name, "key " + key + " position " + std::to_string(i) + ": replica " +
                                         std::to_string(regs[a]->replica_id()) + " -> " +
                                         project_series(pa, kind).to_string() + ", replica " +
                                         std::to_string(regs[b]->replica_id()) + " -> " +
                                         project_series(pb, kind).to_string());
        }
      }
    }
  }
  return Verdict::pass(name);
}

/// Every workload operation has been answered by `horizon`. Operations whose
/// writer is in `excused` (down at the horizon) are not expected to finish.
inline Verdict detect_progress(const History& history, const Workload& workload, Tick horizon,
                               const std::set<WriterId>& excused = {}) {
  const std::string name = "progress";
  std::map<RequestId, Tick> answered;
  for (const auto& e : history.events())
    if (auto* r = std::get_if<Respond>(&e.event)) answered[r->id] = e.time;
  std::string stuck;
  for (std::size_t i = 0; i < workload.size(); ++i) {
    if (excused.contains(workload[i].writer)) continue;
    auto it = answered.find(static_cast<RequestId>(i));
    if (it == answered.end() || it->second > horizon)
      stuck += (stuck.empty() ? "" : ",") + std::to_string(i);
  }
  if (!stuck.empty()) return Verdict::fail(name, "stuck requests [" + stuck + "]");
  return Verdict::pass(name);
}

}  // namespace syncframe
