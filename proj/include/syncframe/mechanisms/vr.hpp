#pragma once

// Viewstamped Replication: the leader of view v is writer v mod n. Normal
// operation replicates each value in one round ([Exe]); a view change is a
// [Pre] pass of one round to collect the logs plus a one-way StartView.

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "syncframe/harness.hpp"
#include "syncframe/mechanisms/common.hpp"

namespace syncframe::vr {

using View = std::uint64_t;

struct Entry {
  View view = 0;
  WriteOp op;
};

namespace msg {
struct Prepare {
  View view;
  std::size_t prev_len;
  std::vector<Entry> entries;
  std::size_t commit;
};
struct PrepareOk {
  View view;
  std::size_t len;
  bool gap;
};
struct Forward {
  ClientOp op;
};
struct ViewChangeRequest {
  View view;
};
struct StartViewChange {
  View view;
};
struct DoViewChange {
  View view;
  std::vector<Entry> log;
  View last_normal;
  std::size_t commit;
};
struct StartView {
  View view;
  std::vector<Entry> log;
  std::size_t commit;
};
struct GetState {
  View view;
};
struct Hint {
  View view;
};
}  // namespace msg

struct Msg {
  std::variant<msg::Prepare, msg::PrepareOk, msg::Forward, msg::ViewChangeRequest,
               msg::StartViewChange, msg::DoViewChange, msg::StartView, msg::GetState, msg::Hint>
      body;

  std::string summary() const {
    struct V {
      std::string operator()(const msg::Prepare& m) const {
        return "prepare v=" + std::to_string(m.view) + " prev=" + std::to_string(m.prev_len) +
               " n=" + std::to_string(m.entries.size()) + " commit=" + std::to_string(m.commit);
      }
      std::string operator()(const msg::PrepareOk& m) const {
        return "prepare-ok v=" + std::to_string(m.view) + " len=" + std::to_string(m.len) +
               (m.gap ? " gap" : "");
      }
      std::string operator()(const msg::Forward& m) const { return "forward " + describe(m.op); }
      std::string operator()(const msg::ViewChangeRequest& m) const {
        return "view-change-request v=" + std::to_string(m.view);
      }
      std::string operator()(const msg::StartViewChange& m) const {
        return "start-view-change v=" + std::to_string(m.view);
      }
      std::string operator()(const msg::DoViewChange& m) const {
        return "do-view-change v=" + std::to_string(m.view) + " len=" + std::to_string(m.log.size()) +
               " lnv=" + std::to_string(m.last_normal);
      }
      std::string operator()(const msg::StartView& m) const {
        return "start-view v=" + std::to_string(m.view) + " len=" + std::to_string(m.log.size()) +
               " commit=" + std::to_string(m.commit);
      }
      std::string operator()(const msg::GetState& m) const {
        return "get-state v=" + std::to_string(m.view);
      }
      std::string operator()(const msg::Hint& m) const { return "hint v=" + std::to_string(m.view); }
    };
    return std::visit(V{}, body);
  }
};

enum class Status { Normal, ViewChange };

inline WriterId leader_of(View v, int n) { return static_cast<WriterId>(v % static_cast<View>(n)); }

class Node {
 public:
  Node(WriterId self, int n, const MechanismParams& params) : self_(self), n_(n), params_(params) {}

  View view() const { return view_; }
  Status status() const { return status_; }
  const std::vector<Entry>& log() const { return log_; }
  bool is_leader() const { return status_ == Status::Normal && leader_of(view_, n_) == self_; }

  void on_start(NodeContext<Msg>& ctx) {
    if (is_leader()) reset_leader_state(ctx);
  }

  void on_client(NodeContext<Msg>& ctx, const ClientOp& op) {
    for (const auto& p : pending_)
      if (p.id == op.id) return;
    pending_.push_back(op);
    if (is_leader()) {
      lead(ctx, op);
    } else {
      if (status_ == Status::Normal) ctx.send(leader_of(view_, n_), Msg{msg::Forward{op}});
      arm_wait(ctx);
    }
  }

  void on_message(NodeContext<Msg>& ctx, WriterId src, const Msg& m) {
    std::visit([&](const auto& body) { handle(ctx, src, body); }, m.body);
  }

  void on_timer(NodeContext<Msg>& ctx, std::uint64_t id, int tag) {
    if (id != timer_) return;
    timer_ = kNoTimer;
    if (tag == kRetransmitTag) {
      if (is_leader() && commit_ < log_.size()) {
        for (auto& [len, info] : inflight_) ++info.rounds;
        broadcast_prepare(ctx, false);
        timer_ = ctx.set_timer(round_timeout(ctx), kRetransmitTag);
      }
      return;
    }
    // Waiting for the leader took too long: ask the next leader to take over.
    if (pending_.empty() && status_ == Status::Normal) return;
    target_ = std::max(view_, target_) + 1;
    WriterId next = leader_of(target_, n_);
    if (next == self_) begin_view_change(ctx, target_);
    else ctx.send(next, Msg{msg::ViewChangeRequest{target_}});
    arm_wait(ctx);
  }

  void on_crash() {
    commit_ = 0;
    acked_.clear();
    next_.clear();
    inflight_.clear();
    dvc_.clear();
    pending_.clear();
    timer_ = kNoTimer;
    target_ = 0;
  }

  void on_recover(NodeContext<Msg>& ctx) {
    commit_ = ctx.reg().size();
    if (is_leader()) reset_leader_state(ctx);
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::GetState{view_}});
  }

  bool idle() const { return pending_.empty() && (!is_leader() || commit_ == log_.size()); }

 private:
  static constexpr std::uint64_t kNoTimer = ~0ULL;
  static constexpr int kWaitTag = 1;
  static constexpr int kRetransmitTag = 2;

  struct Inflight {
    Tick start = 0;
    int rounds = 1;
  };
  struct DvcInfo {
    std::vector<Entry> log;
    View last_normal = 0;
    std::size_t commit = 0;
  };

  Tick round_timeout(const NodeContext<Msg>& ctx) const {
    return std::max<Tick>(params_.retry_base, 4 * ctx.config().max_delay + 2);
  }

  std::set<WriterId> everyone() const {
    std::set<WriterId> all;
    for (WriterId w = 0; w < n_; ++w) all.insert(w);
    return all;
  }

  void arm_wait(NodeContext<Msg>& ctx) {
    if (timer_ == kNoTimer) timer_ = ctx.set_timer(ctx.backoff(round_timeout(ctx)), kWaitTag);
  }

  void reset_leader_state(NodeContext<Msg>& ctx) {
    acked_.assign(static_cast<std::size_t>(n_), 0);
    next_.assign(static_cast<std::size_t>(n_), log_.size());
    acked_[static_cast<std::size_t>(self_)] = log_.size();
    inflight_.clear();
    if (commit_ < log_.size()) timer_ = ctx.set_timer(round_timeout(ctx), kRetransmitTag);
  }

  void lead(NodeContext<Msg>& ctx, const ClientOp& op) {
    for (const auto& e : log_)
      if (e.op.origin == op.id) return;
    WriteOp w;
    if (op.kind == OpKind::Read) {
      Metadata m;
      m.logical_time = op.id;
      w = make_meta_write(self_, next_seq_++, m, op.key, op.id);
    } else {
      w = make_write(self_, next_seq_++, op.key, op.value, {}, op.id);
    }
    log_.push_back(Entry{view_, std::move(w)});
    inflight_[log_.size()] = Inflight{ctx.now(), 1};
    broadcast_prepare(ctx, false);
    advance_commit(ctx);
    if (timer_ == kNoTimer) timer_ = ctx.set_timer(round_timeout(ctx), kRetransmitTag);
  }

  void send_prepare(NodeContext<Msg>& ctx, WriterId p) {
    std::size_t from = std::min(next_[static_cast<std::size_t>(p)], log_.size());
    ctx.send(p, Msg{msg::Prepare{view_, from,
                                 {log_.begin() + static_cast<std::ptrdiff_t>(from), log_.end()},
                                 commit_}});
  }

  void broadcast_prepare(NodeContext<Msg>& ctx, bool all) {
    for (WriterId w = 0; w < n_; ++w) {
      if (w == self_) continue;
      if (all || acked_[static_cast<std::size_t>(w)] < log_.size()) send_prepare(ctx, w);
    }
  }

  void advance_commit(NodeContext<Msg>& ctx) {
    acked_[static_cast<std::size_t>(self_)] = log_.size();
    std::size_t target = commit_;
    for (std::size_t len = log_.size(); len > commit_; --len) {
      int count = 0;
      for (auto a : acked_)
        if (a >= len) ++count;
      if (count >= majority(n_)) {
        target = len;
        break;
      }
    }
    if (target == commit_) return;
    for (std::size_t len = commit_ + 1; len <= target; ++len) {
      auto it = inflight_.find(len);
      if (it == inflight_.end()) continue;
      PassTrace p;
      p.path = {Stage::Exe};
      p.rtts_per_stage[Stage::Exe] = RoundTrips::whole(it->second.rounds);
      p.quorums = {Quorum{everyone(), Stage::Exe}};
      p.converged = {log_[len - 1].op};
      p.arbiter_kind = ArbiterKind::Static;
      p.case_label = "normal";
      p.epoch = view_;
      p.start_tick = it->second.start;
      ctx.emit_pass(std::move(p));
      inflight_.erase(it);
    }
    commit_ = target;
    apply(ctx);
    broadcast_prepare(ctx, true);
  }

  void apply(NodeContext<Msg>& ctx) {
    while (ctx.reg().size() < commit_ && ctx.reg().size() < log_.size()) {
      const WriteOp& w = log_[ctx.reg().size()].op;
      ctx.commit(w);
      if (!w.origin) continue;
      for (auto it = pending_.begin(); it != pending_.end(); ++it) {
        if (it->id != *w.origin) continue;
        OpResult r;
        if (it->kind == OpKind::Read) r.read_value = ctx.reg().project(it->key).to_string();
        ctx.respond(it->id, r);
        pending_.erase(it);
        break;
      }
    }
    if (pending_.empty() && !is_leader()) timer_ = kNoTimer;
  }

  void begin_view_change(NodeContext<Msg>& ctx, View v) {
    view_ = v;
    status_ = Status::ViewChange;
    change_start_ = ctx.now();
    dvc_.clear();
    dvc_[self_] = DvcInfo{log_, last_normal_, commit_};
    timer_ = kNoTimer;
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::StartViewChange{v}});
    arm_wait(ctx);
    maybe_finish_view_change(ctx);
  }

  void maybe_finish_view_change(NodeContext<Msg>& ctx) {
    if (static_cast<int>(dvc_.size()) < majority(n_)) return;
    const DvcInfo* best = nullptr;
    std::size_t commit = commit_;
    for (const auto& [w, info] : dvc_) {
      if (!best || info.last_normal > best->last_normal ||
          (info.last_normal == best->last_normal && info.log.size() > best->log.size()))
        best = &info;
      commit = std::max(commit, info.commit);
    }
    log_ = best->log;
    dvc_.clear();
    status_ = Status::Normal;
    last_normal_ = view_;
    commit_ = std::min(commit, log_.size());

    Metadata m;
    m.view = view_;
    PassTrace p;
    p.path = {Stage::Pre};
    p.rtts_per_stage[Stage::Pre] = RoundTrips::from_halves(3);
    p.quorums = {Quorum{everyone(), Stage::Pre}};
    p.converged = {make_meta_write(self_, next_seq_++, m, "")};
    p.arbiter_kind = ArbiterKind::Static;
    p.case_label = "changing";
    p.epoch = view_;
    p.start_tick = change_start_;
    p.pre_done_tick = ctx.now();
    ctx.emit_pass(std::move(p));

    // The one-way authority broadcast; nobody waits for it.
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::StartView{view_, log_, commit_}});
    timer_ = kNoTimer;
    reset_leader_state(ctx);
    apply(ctx);
    for (const auto& op : std::deque<ClientOp>(pending_)) lead(ctx, op);
    advance_commit(ctx);
  }

  void install(NodeContext<Msg>& ctx, WriterId src, View v, const std::vector<Entry>& log,
               std::size_t commit) {
    const bool newer = v > view_ || (v == view_ && status_ == Status::ViewChange);
    if (!newer && !(v == view_ && log.size() > log_.size())) return;
    if (newer) {
      // Entries past the new leader's log were never committed.
      log_ = log;
    } else {
      for (std::size_t i = log_.size(); i < log.size(); ++i) log_.push_back(log[i]);
    }
    const bool changed_view = v != view_ || status_ != Status::Normal;
    view_ = v;
    status_ = Status::Normal;
    last_normal_ = v;
    commit_ = std::max(commit_, std::min(commit, log_.size()));
    apply(ctx);
    ctx.send(src, Msg{msg::PrepareOk{view_, log_.size(), false}});
    if (changed_view) {
      timer_ = kNoTimer;
      for (const auto& op : pending_) ctx.send(leader_of(view_, n_), Msg{msg::Forward{op}});
      if (!pending_.empty()) arm_wait(ctx);
    }
  }

  // --- handlers ---

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Prepare& m) {
    if (m.view < view_) {
      ctx.send(src, Msg{msg::Hint{view_}});
      return;
    }
    if (m.view > view_ || status_ != Status::Normal) {
      ctx.send(src, Msg{msg::GetState{view_}});
      return;
    }
    if (m.prev_len > log_.size()) {
      ctx.send(src, Msg{msg::PrepareOk{view_, log_.size(), true}});
      return;
    }
    for (std::size_t j = 0; j < m.entries.size(); ++j)
      if (m.prev_len + j >= log_.size()) log_.push_back(m.entries[j]);
    commit_ = std::max(commit_, std::min(m.commit, log_.size()));
    apply(ctx);
    ctx.send(src, Msg{msg::PrepareOk{view_, log_.size(), false}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::PrepareOk& m) {
    if (!is_leader() || m.view != view_) return;
    auto p = static_cast<std::size_t>(src);
    if (m.gap) {
      next_[p] = m.len;
      send_prepare(ctx, src);
      return;
    }
    acked_[p] = std::max(acked_[p], m.len);
    next_[p] = std::max(next_[p], m.len);
    advance_commit(ctx);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Forward& m) {
    if (!is_leader()) return;
    for (const auto& e : log_)
      if (e.op.origin == m.op.id) {
        send_prepare(ctx, src);
        return;
      }
    lead(ctx, m.op);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::ViewChangeRequest& m) {
    if (m.view > view_ || (m.view == view_ && status_ == Status::ViewChange && dvc_.empty())) {
      if (leader_of(m.view, n_) == self_) begin_view_change(ctx, m.view);
      return;
    }
    if (is_leader()) ctx.send(src, Msg{msg::StartView{view_, log_, commit_}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::StartViewChange& m) {
    if (m.view < view_ || (m.view == view_ && status_ == Status::Normal)) {
      if (m.view < view_) ctx.send(src, Msg{msg::Hint{view_}});
      return;
    }
    view_ = m.view;
    status_ = Status::ViewChange;
    dvc_.clear();
    ctx.send(src, Msg{msg::DoViewChange{view_, log_, last_normal_, commit_}});
    timer_ = kNoTimer;
    if (!pending_.empty()) arm_wait(ctx);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::DoViewChange& m) {
    if (m.view != view_ || status_ != Status::ViewChange || leader_of(view_, n_) != self_) return;
    dvc_[src] = DvcInfo{m.log, m.last_normal, m.commit};
    maybe_finish_view_change(ctx);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::StartView& m) {
    install(ctx, src, m.view, m.log, m.commit);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::GetState& m) {
    if (is_leader() && view_ >= m.view) {
      ctx.send(src, Msg{msg::StartView{view_, log_, commit_}});
    } else if (view_ > m.view) {
      ctx.send(src, Msg{msg::Hint{view_}});
    }
  }

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::Hint& m) {
    if (m.view > view_ || (m.view == view_ && status_ != Status::Normal))
      ctx.send(leader_of(m.view, n_), Msg{msg::GetState{m.view}});
  }

  WriterId self_;
  int n_;
  MechanismParams params_;

  // Stable storage.
  View view_ = 0;
  Status status_ = Status::Normal;
  View last_normal_ = 0;
  std::vector<Entry> log_;
  std::uint64_t next_seq_ = 0;

  // Volatile.
  std::size_t commit_ = 0;
  std::vector<std::size_t> acked_;
  std::vector<std::size_t> next_;
  std::map<std::size_t, Inflight> inflight_;
  std::map<WriterId, DvcInfo> dvc_;
  Tick change_start_ = 0;
  View target_ = 0;
  std::deque<ClientOp> pending_;
  std::uint64_t timer_ = kNoTimer;
};

struct Mechanism {
  using Msg = vr::Msg;
  using Node = vr::Node;
  using Params = MechanismParams;
  static int endpoints(int n, const Params&) { return n; }
  static ProjectionKind projection(const Params& p) { return p.projection; }
};

}  // namespace syncframe::vr
