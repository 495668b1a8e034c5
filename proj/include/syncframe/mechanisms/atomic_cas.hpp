#pragma once

// Shared-memory register driven by compare-and-swap on its length. The
// memory is an auxiliary endpoint (id n) that never fails; every writer's
// access is one round trip that reaches all writers' copies.

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "syncframe/harness.hpp"
#include "syncframe/mechanisms/common.hpp"

namespace syncframe::atomic {

struct CasSuccess {
  std::size_t new_len = 0;
  bool operator==(const CasSuccess&) const = default;
};
struct CasFailed {
  std::size_t current_len = 0;
  bool operator==(const CasFailed&) const = default;
};
using CasOutcome = std::variant<CasSuccess, CasFailed>;

/// The shared cell: appends iff the caller saw the current length.
class CasCell {
 public:
  CasOutcome cas(std::size_t expected_len, const WriteOp& w) {
    if (expected_len != series_.size()) return CasFailed{series_.size()};
    series_.push_back(w);
    return CasSuccess{series_.size()};
  }
  const std::vector<WriteOp>& series() const { return series_; }
  std::size_t size() const { return series_.size(); }

 private:
  std::vector<WriteOp> series_;
};

namespace msg {
struct Cas {
  std::size_t expected;
  WriteOp write;
};
struct CasReply {
  RequestId request;
  CasOutcome outcome;
};
struct Read {
  RequestId request;
  std::string key;
};
struct ReadReply {
  RequestId request;
  std::string value;
};
/// Memory -> writers: committed entries starting at index `from`.
struct Update {
  std::size_t from;
  std::vector<WriteOp> ops;
};
struct CatchUp {
  std::size_t from;
};
}  // namespace msg

struct Msg {
  std::variant<msg::Cas, msg::CasReply, msg::Read, msg::ReadReply, msg::Update, msg::CatchUp> body;

  std::string summary() const {
    struct V {
      std::string operator()(const msg::Cas& m) const {
        return "cas expect=" + std::to_string(m.expected) + " " + describe(m.write);
      }
      std::string operator()(const msg::CasReply& m) const {
        if (auto* s = std::get_if<CasSuccess>(&m.outcome))
          return "cas-ok req=" + std::to_string(m.request) + " len=" + std::to_string(s->new_len);
        return "cas-failed req=" + std::to_string(m.request) +
               " len=" + std::to_string(std::get<CasFailed>(m.outcome).current_len);
      }
      std::string operator()(const msg::Read& m) const {
        return "read req=" + std::to_string(m.request) + " " + m.key;
      }
      std::string operator()(const msg::ReadReply& m) const {
        return "read-reply req=" + std::to_string(m.request) + " " + m.value;
      }
      std::string operator()(const msg::Update& m) const {
        return "update from=" + std::to_string(m.from) + " n=" + std::to_string(m.ops.size());
      }
      std::string operator()(const msg::CatchUp& m) const {
        return "catchup from=" + std::to_string(m.from);
      }
    };
    return std::visit(V{}, body);
  }
};

class Node {
 public:
  Node(WriterId self, int n, const MechanismParams& params)
      : self_(self), n_(n), params_(params), memory_(self == n) {}

  bool is_memory() const { return memory_; }

  void on_client(NodeContext<Msg>& ctx, const ClientOp& op) {
    for (const auto& p : pending_)
      if (p.id == op.id) return;
    pending_.push_back(op);
    if (!busy_) next(ctx);
  }

  void on_message(NodeContext<Msg>& ctx, WriterId src, const Msg& m) {
    std::visit([&](const auto& body) { handle(ctx, src, body); }, m.body);
  }

  // Requests or replies lost in transit: ask again. The memory dedupes
  // repeated CAS requests by origin.
  void on_timer(NodeContext<Msg>& ctx, std::uint64_t id, int /*tag*/) {
    if (busy_ && id == retry_) next(ctx);
  }

  void on_crash() {
    pending_.clear();
    busy_ = false;
    buffered_.clear();
  }

  void on_recover(NodeContext<Msg>& ctx) { ctx.send(n_, Msg{msg::CatchUp{ctx.reg().size()}}); }

  bool idle() const { return pending_.empty(); }

 private:
  void next(NodeContext<Msg>& ctx) {
    busy_ = false;
    while (!pending_.empty() && ctx.answered(pending_.front().id)) pending_.pop_front();
    if (pending_.empty()) return;
    const ClientOp& op = pending_.front();
    busy_ = true;
    attempt_start_ = ctx.now();
    retry_ = ctx.set_timer(ctx.backoff(params_.retry_base), 0);
    if (op.kind == OpKind::Read) {
      ctx.send(n_, Msg{msg::Read{op.id, op.key}});
      return;
    }
    if (!current_ || current_->origin != op.id)
      current_ = make_write(self_, next_seq_++, op.key, op.value, {}, op.id);
    ctx.send(n_, Msg{msg::Cas{known_len_, *current_}});
  }

  // --- memory side ---

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Cas& m) {
    if (!memory_) return;
    const RequestId req = *m.write.origin;
    if (applied_.contains(req)) {
      ctx.send(src, Msg{msg::CasReply{req, CasSuccess{applied_.at(req)}}});
      return;
    }
    CasOutcome out = cell_.cas(m.expected, m.write);
    if (auto* s = std::get_if<CasSuccess>(&out)) {
      applied_[req] = s->new_len;
      ctx.commit(m.write);
      for (WriterId w = 0; w < n_; ++w)
        ctx.send(w, Msg{msg::Update{s->new_len - 1, {m.write}}});
    }
    ctx.send(src, Msg{msg::CasReply{req, out}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Read& m) {
    if (!memory_) return;
    ctx.send(src, Msg{msg::ReadReply{m.request, ctx.reg().project(m.key).to_string()}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::CatchUp& m) {
    if (!memory_ || m.from >= cell_.size()) return;
    ctx.send(src, Msg{msg::Update{m.from, {cell_.series().begin() + static_cast<std::ptrdiff_t>(m.from),
                                            cell_.series().end()}}});
  }

  // --- writer side ---

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::CasReply& m) {
    if (!busy_ || pending_.empty() || pending_.front().id != m.request) return;
    if (auto* f = std::get_if<CasFailed>(&m.outcome)) {
      // Lost the race: the write returns to W and retries against the new
      // length.
      known_len_ = std::max(known_len_, f->current_len);
      next(ctx);
      return;
    }
    const auto& s = std::get<CasSuccess>(m.outcome);
    known_len_ = std::max(known_len_, s.new_len);
    PassTrace p;
    p.path = {Stage::Exe};
    p.rtts_per_stage[Stage::Exe] = RoundTrips::whole(1);
    std::set<WriterId> all;
    for (WriterId w = 0; w < n_; ++w) all.insert(w);
    p.quorums = {Quorum{all, Stage::Exe}};
    p.converged = {*current_};
    p.arbiter_kind = ArbiterKind::Static;
    p.start_tick = attempt_start_;
    ctx.emit_pass(std::move(p));
    ctx.respond(m.request, OpResult{});
    pending_.pop_front();
    current_.reset();
    next(ctx);
  }

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::ReadReply& m) {
    if (!busy_ || pending_.empty() || pending_.front().id != m.request) return;
    OpResult r;
    r.read_value = m.value;
    ctx.respond(m.request, r);
    pending_.pop_front();
    next(ctx);
  }

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::Update& m) {
    for (std::size_t i = 0; i < m.ops.size(); ++i) buffered_[m.from + i] = m.ops[i];
    while (true) {
      auto it = buffered_.find(ctx.reg().size());
      if (it == buffered_.end()) break;
      ctx.commit(it->second);
      buffered_.erase(it);
    }
    if (!buffered_.empty() && buffered_.begin()->first > ctx.reg().size())
      ctx.send(n_, Msg{msg::CatchUp{ctx.reg().size()}});
    std::erase_if(buffered_, [&](const auto& kv) { return kv.first < ctx.reg().size(); });
    known_len_ = std::max(known_len_, ctx.reg().size());
  }

  WriterId self_;
  int n_;
  MechanismParams params_;
  bool memory_;

  // Memory endpoint.
  CasCell cell_;
  std::map<RequestId, std::size_t> applied_;

  // Writer: stable.
  std::uint64_t next_seq_ = 0;
  std::optional<WriteOp> current_;
  // Writer: volatile.
  std::size_t known_len_ = 0;
  bool busy_ = false;
  Tick attempt_start_ = 0;
  std::uint64_t retry_ = 0;
  std::deque<ClientOp> pending_;
  std::map<std::size_t, WriteOp> buffered_;
};

struct Mechanism {
  using Msg = atomic::Msg;
  using Node = atomic::Node;
  using Params = MechanismParams;
  static int endpoints(int n, const Params&) { return n + 1; }
  static ProjectionKind projection(const Params& p) { return p.projection; }
};

}  // namespace syncframe::atomic
