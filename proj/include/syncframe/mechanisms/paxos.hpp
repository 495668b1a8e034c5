#pragma once

// Chained single-decree Paxos: every writer may propose; slot k of the log
// is decided by its own Paxos instance. Each decided slot is one pass
// W -> pre -> exe -> w with a static arbiter (the ballot owner).

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "syncframe/harness.hpp"
#include "syncframe/mechanisms/common.hpp"

namespace syncframe::paxos {

using Slot = std::uint64_t;
using Ballot = std::uint64_t;

struct Accepted {
  Ballot ballot = 0;
  WriteOp op;
  bool operator==(const Accepted&) const = default;
};

namespace msg {
struct Prepare {
  Slot slot;
  Ballot ballot;
};
struct Promise {
  Slot slot;
  Ballot ballot;
  std::optional<Accepted> accepted;
};
struct Nack {
  Slot slot;
  Ballot ballot;
  Ballot promised;
};
struct Accept {
  Slot slot;
  Ballot ballot;
  WriteOp op;
};
struct AcceptOk {
  Slot slot;
  Ballot ballot;
};
struct Decided {
  Slot slot;
  WriteOp op;
};
struct CatchUp {
  Slot from;
};
struct CatchUpReply {
  Slot from;
  std::vector<WriteOp> ops;
};
}  // namespace msg

struct Msg {
  std::variant<msg::Prepare, msg::Promise, msg::Nack, msg::Accept, msg::AcceptOk, msg::Decided,
               msg::CatchUp, msg::CatchUpReply>
      body;

  std::string summary() const {
    struct V {
      std::string operator()(const msg::Prepare& m) const {
        return "prepare s=" + std::to_string(m.slot) + " b=" + std::to_string(m.ballot);
      }
      std::string operator()(const msg::Promise& m) const {
        std::string s = "promise s=" + std::to_string(m.slot) + " b=" + std::to_string(m.ballot);
        if (m.accepted)
          s += " acc=" + std::to_string(m.accepted->ballot) + ":" + describe(m.accepted->op);
        return s;
      }
      std::string operator()(const msg::Nack& m) const {
        return "nack s=" + std::to_string(m.slot) + " b=" + std::to_string(m.ballot) +
               " promised=" + std::to_string(m.promised);
      }
      std::string operator()(const msg::Accept& m) const {
        return "accept s=" + std::to_string(m.slot) + " b=" + std::to_string(m.ballot) + " " +
               describe(m.op);
      }
      std::string operator()(const msg::AcceptOk& m) const {
        return "accepted s=" + std::to_string(m.slot) + " b=" + std::to_string(m.ballot);
      }
      std::string operator()(const msg::Decided& m) const {
        return "decided s=" + std::to_string(m.slot) + " " + describe(m.op);
      }
      std::string operator()(const msg::CatchUp& m) const {
        return "catchup from=" + std::to_string(m.from);
      }
      std::string operator()(const msg::CatchUpReply& m) const {
        return "catchup-reply from=" + std::to_string(m.from) + " n=" + std::to_string(m.ops.size());
      }
    };
    return std::visit(V{}, body);
  }
};

/// Acceptor state of one slot. A peer promises or accepts iff the ballot is
/// at least the highest it has promised.
struct AcceptorSlot {
  Ballot promised = 0;
  std::optional<Accepted> accepted;

  /// Returns the promise, or the ballot that pre-empts the request.
  std::variant<msg::Promise, msg::Nack> on_prepare(Slot slot, Ballot b) {
    if (b >= promised) {
      promised = b;
      return msg::Promise{slot, b, accepted};
    }
    return msg::Nack{slot, b, promised};
  }

  bool on_accept(Ballot b, const WriteOp& op) {
    if (b < promised) return false;
    promised = b;
    accepted = Accepted{b, op};
    return true;
  }
};

class Node {
 public:
  Node(WriterId self, int n, const MechanismParams& params)
      : self_(self), n_(n), params_(params),
        threshold_(params.quorum_threshold > 0
                       ? params.quorum_threshold
                       : (params.kind == MechanismKind::BrokenSubMajorityPaxos ? std::max(1, n / 2)
                                                                              : majority(n))) {}

  int threshold() const { return threshold_; }

  void on_client(NodeContext<Msg>& ctx, const ClientOp& op) {
    for (const auto& q : queue_)
      if (q.id == op.id) return;
    queue_.push_back(op);
    if (!attempt_) start_next(ctx);
  }

  void on_message(NodeContext<Msg>& ctx, WriterId src, const Msg& m) {
    std::visit([&](const auto& body) { handle(ctx, src, body); }, m.body);
  }

  void on_timer(NodeContext<Msg>& ctx, std::uint64_t id, int /*tag*/) {
    if (!attempt_ || attempt_->timer != id) return;
    // Either the backoff elapsed or the round timed out: try again with a
    // higher ballot.
    begin_round(ctx);
  }

  void on_crash() {
    queue_.clear();
    attempt_.reset();
  }

  void on_recover(NodeContext<Msg>& ctx) {
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::CatchUp{ctx.reg().size()}});
  }

  bool idle() const { return queue_.empty(); }

  const AcceptorSlot* acceptor(Slot s) const {
    auto it = acceptors_.find(s);
    return it == acceptors_.end() ? nullptr : &it->second;
  }

 private:
  enum class Phase { Preparing, Accepting, Backoff };

  struct Attempt {
    RequestId request = 0;
    WriteOp own;  // this node's write for the request; kept across retries
    Slot slot = 0;
    Ballot ballot = 0;
    Phase phase = Phase::Preparing;
    std::vector<WriterId> promisers;
    std::optional<Accepted> best;
    WriteOp proposal;
    std::set<WriterId> accept_quorum;
    std::set<WriterId> acks;
    int pre_rounds = 0;
    int exe_rounds = 0;
    Tick start_tick = 0;
    std::optional<Tick> pre_done_tick;
    std::uint64_t timer = ~0ULL;
  };

  Tick round_timeout(const NodeContext<Msg>& ctx) const {
    return std::max<Tick>(params_.retry_base, 4 * ctx.config().max_delay + 2);
  }

  void start_next(NodeContext<Msg>& ctx) {
    while (!queue_.empty()) {
      const ClientOp& op = queue_.front();
      if (ctx.answered(op.id)) {
        queue_.pop_front();
        continue;
      }
      // A write decided before a crash answers the resubmitted request.
      bool done = false;
      for (const auto& w : ctx.reg().series())
        if (w.origin == op.id && w.writer_id == self_) done = true;
      if (done) {
        answer(ctx, op);
        queue_.pop_front();
        continue;
      }
      Attempt a;
      a.request = op.id;
      if (op.kind == OpKind::Read) {
        Metadata m;
        m.logical_time = op.id;
        a.own = make_meta_write(self_, next_seq_++, m, op.key, op.id);
      } else {
        a.own = make_write(self_, next_seq_++, op.key, op.value, {}, op.id);
      }
      attempt_ = std::move(a);
      enter_slot(ctx);
      return;
    }
  }

  void enter_slot(NodeContext<Msg>& ctx) {
    attempt_->slot = ctx.reg().size();
    attempt_->pre_rounds = 0;
    attempt_->exe_rounds = 0;
    attempt_->start_tick = ctx.now();
    attempt_->pre_done_tick.reset();
    begin_round(ctx);
  }

  void begin_round(NodeContext<Msg>& ctx) {
    Attempt& a = *attempt_;
    if (a.slot < ctx.reg().size()) {
      enter_slot(ctx);
      return;
    }
    ++max_round_;
    a.ballot = max_round_ * static_cast<Ballot>(n_) + static_cast<Ballot>(self_);
    a.phase = Phase::Preparing;
    a.promisers.clear();
    a.best.reset();
    a.acks.clear();
    ++a.pre_rounds;
    a.timer = ctx.set_timer(round_timeout(ctx), 0);
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::Prepare{a.slot, a.ballot}});
    handle(ctx, self_, msg::Prepare{a.slot, a.ballot});
  }

  void reply(NodeContext<Msg>& ctx, WriterId dst, Msg m) {
    if (dst == self_) {
      std::visit([&](const auto& body) { handle(ctx, self_, body); }, m.body);
    } else {
      ctx.send(dst, std::move(m));
    }
  }

  // --- acceptor ---

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Prepare& m) {
    note_ballot(m.ballot);
    if (auto d = decided_op(ctx, m.slot)) {
      reply(ctx, src, Msg{msg::Decided{m.slot, *d}});
      return;
    }
    auto r = acceptors_[m.slot].on_prepare(m.slot, m.ballot);
    std::visit([&](auto&& body) { reply(ctx, src, Msg{body}); }, r);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Accept& m) {
    note_ballot(m.ballot);
    if (auto d = decided_op(ctx, m.slot)) {
      reply(ctx, src, Msg{msg::Decided{m.slot, *d}});
      return;
    }
    auto& acc = acceptors_[m.slot];
    if (acc.on_accept(m.ballot, m.op)) {
      reply(ctx, src, Msg{msg::AcceptOk{m.slot, m.ballot}});
    } else {
      reply(ctx, src, Msg{msg::Nack{m.slot, m.ballot, acc.promised}});
    }
  }

  // --- proposer ---

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Promise& m) {
    if (!attempt_ || attempt_->phase != Phase::Preparing || attempt_->slot != m.slot ||
        attempt_->ballot != m.ballot)
      return;
    Attempt& a = *attempt_;
    if (std::find(a.promisers.begin(), a.promisers.end(), src) != a.promisers.end()) return;
    a.promisers.push_back(src);
    if (m.accepted && (!a.best || m.accepted->ballot > a.best->ballot)) a.best = m.accepted;
    if (static_cast<int>(a.promisers.size()) < threshold_) return;

    a.phase = Phase::Accepting;
    a.pre_done_tick = ctx.now();
    a.proposal = a.best ? a.best->op : a.own;
    a.accept_quorum = {a.promisers.begin(), a.promisers.begin() + threshold_};
    ++a.exe_rounds;
    a.timer = ctx.set_timer(round_timeout(ctx), 0);
    const auto quorum = a.accept_quorum;
    const msg::Accept accept{a.slot, a.ballot, a.proposal};
    for (WriterId w : quorum)
      if (w != self_) ctx.send(w, Msg{accept});
    if (quorum.contains(self_)) handle(ctx, self_, accept);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::AcceptOk& m) {
    if (!attempt_ || attempt_->phase != Phase::Accepting || attempt_->slot != m.slot ||
        attempt_->ballot != m.ballot)
      return;
    Attempt& a = *attempt_;
    a.acks.insert(src);
    if (static_cast<int>(a.acks.size()) < threshold_) return;

    const Slot slot = a.slot;
    const WriteOp chosen = a.proposal;
    if (!decided_op(ctx, slot)) {
      PassTrace p;
      p.path = {Stage::Pre, Stage::Exe};
      p.rtts_per_stage[Stage::Pre] = RoundTrips::whole(a.pre_rounds);
      p.rtts_per_stage[Stage::Exe] = RoundTrips::whole(a.exe_rounds);
      std::set<WriterId> everyone;
      for (WriterId w = 0; w < n_; ++w) everyone.insert(w);
      p.quorums = {Quorum{everyone, Stage::Pre}, Quorum{a.accept_quorum, Stage::Exe}};
      p.converged = {chosen};
      p.arbiter_kind = ArbiterKind::Static;
      p.start_tick = a.start_tick;
      p.pre_done_tick = a.pre_done_tick;
      ctx.emit_pass(std::move(p));
    }
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::Decided{slot, chosen}});
    learn(ctx, slot, chosen);
  }

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::Nack& m) {
    note_ballot(m.promised);
    if (!attempt_ || attempt_->slot != m.slot || attempt_->ballot != m.ballot ||
        attempt_->phase == Phase::Backoff)
      return;
    // Pre-empted: the write goes back to W and retries after a backoff.
    attempt_->phase = Phase::Backoff;
    attempt_->timer = ctx.set_timer(ctx.backoff(params_.retry_base), 1);
  }

  // --- learner ---

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::Decided& m) {
    learn(ctx, m.slot, m.op);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::CatchUp& m) {
    const auto& series = ctx.reg().series();
    if (m.from >= series.size()) return;
    ctx.send(src, Msg{msg::CatchUpReply{m.from, {series.begin() + static_cast<std::ptrdiff_t>(m.from),
                                                 series.end()}}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::CatchUpReply& m) {
    for (std::size_t i = 0; i < m.ops.size(); ++i) learn(ctx, m.from + i, m.ops[i]);
  }

  std::optional<WriteOp> decided_op(const NodeContext<Msg>& ctx, Slot s) const {
    if (s < ctx.reg().size()) return ctx.reg().series()[s];
    auto it = decided_.find(s);
    if (it != decided_.end()) return it->second;
    return std::nullopt;
  }

  void learn(NodeContext<Msg>& ctx, Slot slot, const WriteOp& op) {
    if (slot < ctx.reg().size()) return;
    decided_.emplace(slot, op);
    while (true) {
      auto it = decided_.find(ctx.reg().size());
      if (it == decided_.end()) break;
      WriteOp w = it->second;
      decided_.erase(it);
      acceptors_.erase(ctx.reg().size());
      ctx.commit(w);
      if (w.writer_id == self_ && w.origin) {
        for (auto q = queue_.begin(); q != queue_.end(); ++q)
          if (q->id == *w.origin) {
            answer(ctx, *q);
            break;
          }
      }
    }
    reconcile(ctx);
  }

  void answer(NodeContext<Msg>& ctx, const ClientOp& op) {
    OpResult r;
    if (op.kind == OpKind::Read) r.read_value = ctx.reg().project(op.key).to_string();
    ctx.respond(op.id, r);
  }

  /// After learning decisions: finish the current request if its write made
  /// it into the log, or carry it over to the next open slot.
  void reconcile(NodeContext<Msg>& ctx) {
    if (!attempt_) return;
    if (ctx.answered(attempt_->request)) {
      std::erase_if(queue_, [&](const ClientOp& q) { return q.id == attempt_->request; });
      attempt_.reset();
      start_next(ctx);
      return;
    }
    if (attempt_->slot < ctx.reg().size() && attempt_->phase != Phase::Backoff) enter_slot(ctx);
  }

  void note_ballot(Ballot b) { max_round_ = std::max<Ballot>(max_round_, b / static_cast<Ballot>(n_)); }

  WriterId self_;
  int n_;
  MechanismParams params_;
  int threshold_;

  // Stable storage.
  std::map<Slot, AcceptorSlot> acceptors_;
  std::map<Slot, WriteOp> decided_;  // decided beyond the applied prefix
  std::uint64_t next_seq_ = 0;
  Ballot max_round_ = 0;

  // Volatile.
  std::deque<ClientOp> queue_;
  std::optional<Attempt> attempt_;
};

struct Mechanism {
  using Msg = paxos::Msg;
  using Node = paxos::Node;
  using Params = MechanismParams;
  static int endpoints(int n, const Params&) { return n; }
  static ProjectionKind projection(const Params& p) { return p.projection; }
};

}  // namespace syncframe::paxos
