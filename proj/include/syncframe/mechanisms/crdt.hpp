#pragma once

// Conflict-free replicated types and their gossip-based dissemination. A
// writer applies its update locally and spreads it one way; there is no
// quorum to wait for and no arbiter.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "syncframe/harness.hpp"
#include "syncframe/mechanisms/common.hpp"

namespace syncframe::crdt {

/// Grow-only counter: one monotone slot per writer, merged by pointwise max.
class GCounter {
 public:
  GCounter() = default;
  explicit GCounter(std::vector<std::uint64_t> slots) : slots_(std::move(slots)) {}

  void increment(WriterId w, std::uint64_t amount) {
    if (static_cast<std::size_t>(w) >= slots_.size()) slots_.resize(static_cast<std::size_t>(w) + 1, 0);
    slots_[static_cast<std::size_t>(w)] += amount;
  }

  GCounter merge(const GCounter& o) const {
    std::vector<std::uint64_t> out(std::max(slots_.size(), o.slots_.size()), 0);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = std::max(i < slots_.size() ? slots_[i] : 0, i < o.slots_.size() ? o.slots_[i] : 0);
    return GCounter(std::move(out));
  }

  std::uint64_t value() const {
    std::uint64_t total = 0;
    for (auto s : slots_) total += s;
    return total;
  }

  const std::vector<std::uint64_t>& slots() const { return slots_; }
  bool operator==(const GCounter&) const = default;

 private:
  std::vector<std::uint64_t> slots_;
};

/// Observed-remove set. Every add carries a unique tag; a remove deletes the
/// tags its replica had observed, so a concurrent add survives.
class ORSet {
 public:
  void add(const std::string& element, OpId tag) {
    if (!removed_.contains(tag)) adds_[element].insert(tag);
  }

  /// Tags of `element` visible here; the payload of a remove.
  std::set<OpId> observed(const std::string& element) const {
    auto it = adds_.find(element);
    return it == adds_.end() ? std::set<OpId>{} : it->second;
  }

  void remove_tags(const std::set<OpId>& tags) {
    removed_.insert(tags.begin(), tags.end());
    for (auto it = adds_.begin(); it != adds_.end();) {
      for (const auto& t : tags) it->second.erase(t);
      it = it->second.empty() ? adds_.erase(it) : std::next(it);
    }
  }

  ORSet merge(const ORSet& o) const {
    ORSet out = *this;
    out.removed_.insert(o.removed_.begin(), o.removed_.end());
    for (const auto& [e, tags] : o.adds_)
      for (const auto& t : tags) out.adds_[e].insert(t);
    out.remove_tags(out.removed_);
    return out;
  }

  bool contains(const std::string& element) const { return adds_.contains(element); }

  std::set<std::string> elements() const {
    std::set<std::string> out;
    for (const auto& [e, tags] : adds_) out.insert(e);
    return out;
  }

  bool operator==(const ORSet&) const = default;

 private:
  std::map<std::string, std::set<OpId>> adds_;
  std::set<OpId> removed_;
};

namespace msg {
/// One-way push of updates.
struct Gossip {
  std::vector<WriteOp> ops;
};
/// Sent by a recovering replica together with everything it holds.
struct Sync {
  std::vector<WriteOp> ops;
};
}  // namespace msg

struct Msg {
  std::variant<msg::Gossip, msg::Sync> body;

  std::string summary() const {
    const auto& ops = std::holds_alternative<msg::Gossip>(body) ? std::get<msg::Gossip>(body).ops
                                                                : std::get<msg::Sync>(body).ops;
    std::string s = std::holds_alternative<msg::Gossip>(body) ? "gossip [" : "sync [";
    for (std::size_t i = 0; i < ops.size(); ++i) {
      if (i) s += ",";
      s += describe(ops[i]);
    }
    return s + "]";
  }
};

class Node {
 public:
  Node(WriterId self, int n, const MechanismParams& params)
      : self_(self), n_(n), params_(params),
        fanout_(params.fanout <= 0 ? n : std::min(params.fanout, n)) {}

  const std::map<std::string, GCounter>& counters() const { return counters_; }
  const std::map<std::string, ORSet>& sets() const { return sets_; }

  void on_client(NodeContext<Msg>& ctx, const ClientOp& op) {
    if (ctx.answered(op.id)) return;
    OpResult r;
    if (op.kind == OpKind::Read) {
      r.read_value = ctx.reg().project(op.key).to_string();
      ctx.respond(op.id, r);
      return;
    }
    WriteOp w;
    if (op.kind == OpKind::Remove) {
      Metadata m;
      m.deps = sets_[op.key].observed(op.value);
      m.logical_time = op.id;
      w = make_meta_write(self_, next_seq_++, m, op.key, op.id);
    } else {
      w = make_write(self_, next_seq_++, op.key, op.value, {}, op.id);
    }
    absorb(ctx, w);
    ctx.respond(op.id, r);
    if (batch_.empty()) {
      batch_start_ = ctx.now();
      ctx.set_timer(std::max<Tick>(1, params_.gossip_delay), 0);
    }
    batch_.push_back(std::move(w));
  }

  void on_message(NodeContext<Msg>& ctx, WriterId src, const Msg& m) {
    if (auto* g = std::get_if<msg::Gossip>(&m.body)) {
      std::vector<WriteOp> fresh;
      for (const auto& w : g->ops)
        if (absorb(ctx, w)) fresh.push_back(w);
      if (!fresh.empty() && fanout_ < n_ && (self_ + 1) % n_ != src)
        ctx.send((self_ + 1) % n_, Msg{msg::Gossip{std::move(fresh)}});
    } else {
      const auto& s = std::get<msg::Sync>(m.body);
      for (const auto& w : s.ops) absorb(ctx, w);
      // Answer with everything we hold so the recovering replica catches up.
      ctx.send(src, Msg{msg::Gossip{ctx.reg().series()}});
    }
  }

  void on_timer(NodeContext<Msg>& ctx, std::uint64_t /*id*/, int /*tag*/) {
    if (batch_.empty()) return;
    std::set<WriterId> quorum;
    for (int i = 0; i < fanout_; ++i) quorum.insert((self_ + i) % n_);
    for (WriterId w : quorum)
      if (w != self_) ctx.send(w, Msg{msg::Gossip{batch_}});
    if (fanout_ == 1 && n_ > 1) ctx.send((self_ + 1) % n_, Msg{msg::Gossip{batch_}});

    PassTrace p;
    p.path = {Stage::Exe};
    p.rtts_per_stage[Stage::Exe] = RoundTrips::half();
    p.quorums = {Quorum{quorum, Stage::Exe}};
    p.converged = batch_;
    p.arbiter_kind = ArbiterKind::None;
    p.case_label = fanout_ == n_ ? "broadcast" : "local";
    p.start_tick = batch_start_;
    ctx.emit_pass(std::move(p));
    batch_.clear();
  }

  void on_crash() { batch_.clear(); }

  void on_recover(NodeContext<Msg>& ctx) {
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::Sync{ctx.reg().series()}});
  }

  bool idle() const { return batch_.empty(); }

 private:
  /// Applies an update once; returns whether it was new here.
  bool absorb(NodeContext<Msg>& ctx, const WriteOp& w) {
    if (ctx.reg().contains(w.id())) return false;
    if (params_.kind == MechanismKind::CrdtGCounter) {
      std::uint64_t amount = 0;
      if (!w.value.is_phi()) amount = std::stoull(w.value.bytes());
      counters_[w.key].increment(w.writer_id, amount);
    } else {
      if (w.value.is_phi()) {
        if (w.meta.deps) sets_[w.key].remove_tags(*w.meta.deps);
      } else {
        sets_[w.key].add(w.value.bytes(), w.id());
      }
    }
    ctx.commit(w);
    return true;
  }

  WriterId self_;
  int n_;
  MechanismParams params_;
  int fanout_;

  // Stable storage (the register lives in the harness).
  std::map<std::string, GCounter> counters_;
  std::map<std::string, ORSet> sets_;
  std::uint64_t next_seq_ = 0;

  // Volatile.
  std::vector<WriteOp> batch_;
  Tick batch_start_ = 0;
};

struct Mechanism {
  using Msg = crdt::Msg;
  using Node = crdt::Node;
  using Params = MechanismParams;
  static int endpoints(int n, const Params&) { return n; }
  static ProjectionKind projection(const Params& p) {
    return p.kind == MechanismKind::CrdtGCounter ? ProjectionKind::Sum : ProjectionKind::SetUnion;
  }
};

}  // namespace syncframe::crdt
