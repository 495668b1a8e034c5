#pragma once

// Raft at the granularity of leader election plus log replication. An
// election is a pass on the [Pre] path whose converged write is the
// leader's metadata-only marker; each value the leader replicates is an
// [Exe] pass.

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "syncframe/harness.hpp"
#include "syncframe/mechanisms/common.hpp"

namespace syncframe::raft {

using Term = std::uint64_t;

struct Entry {
  Term term = 0;
  WriteOp op;
};

namespace msg {
struct RequestVote {
  Term term;
  std::size_t last_len;
  Term last_term;
};
struct Vote {
  Term term;
  bool granted;
};
struct Append {
  Term term;
  std::size_t prev_len;
  Term prev_term;
  std::vector<Entry> entries;
  std::size_t commit;
};
struct AppendReply {
  Term term;
  bool success;
  std::size_t match;
};
struct Forward {
  ClientOp op;
};
struct CatchUp {
  std::size_t from;
};
struct CatchUpReply {
  std::size_t from;
  std::vector<Entry> entries;
};
}  // namespace msg

struct Msg {
  std::variant<msg::RequestVote, msg::Vote, msg::Append, msg::AppendReply, msg::Forward,
               msg::CatchUp, msg::CatchUpReply>
      body;

  std::string summary() const {
    struct V {
      std::string operator()(const msg::RequestVote& m) const {
        return "request-vote t=" + std::to_string(m.term) + " len=" + std::to_string(m.last_len) +
               " lt=" + std::to_string(m.last_term);
      }
      std::string operator()(const msg::Vote& m) const {
        return "vote t=" + std::to_string(m.term) + (m.granted ? " yes" : " no");
      }
      std::string operator()(const msg::Append& m) const {
        return "append t=" + std::to_string(m.term) + " prev=" + std::to_string(m.prev_len) +
               " n=" + std::to_string(m.entries.size()) + " commit=" + std::to_string(m.commit);
      }
      std::string operator()(const msg::AppendReply& m) const {
        return "append-reply t=" + std::to_string(m.term) + (m.success ? " ok" : " fail") +
               " match=" + std::to_string(m.match);
      }
      std::string operator()(const msg::Forward& m) const { return "forward " + describe(m.op); }
      std::string operator()(const msg::CatchUp& m) const {
        return "catchup from=" + std::to_string(m.from);
      }
      std::string operator()(const msg::CatchUpReply& m) const {
        return "catchup-reply from=" + std::to_string(m.from) +
               " n=" + std::to_string(m.entries.size());
      }
    };
    return std::visit(V{}, body);
  }
};

enum class Role { Follower, Candidate, Leader };

class Node {
 public:
  Node(WriterId self, int n, const MechanismParams& params) : self_(self), n_(n), params_(params) {}

  Role role() const { return role_; }
  Term term() const { return term_; }
  std::optional<WriterId> leader() const { return leader_; }
  const std::vector<Entry>& log() const { return log_; }

  void on_client(NodeContext<Msg>& ctx, const ClientOp& op) {
    for (const auto& p : pending_)
      if (p.id == op.id) return;
    pending_.push_back(op);
    if (role_ == Role::Leader) {
      lead(ctx, op);
    } else if (leader_) {
      ctx.send(*leader_, Msg{msg::Forward{op}});
      arm_wait(ctx);
    } else if (role_ == Role::Follower) {
      start_election(ctx);
    }
  }

  void on_message(NodeContext<Msg>& ctx, WriterId src, const Msg& m) {
    std::visit([&](const auto& body) { handle(ctx, src, body); }, m.body);
  }

  void on_timer(NodeContext<Msg>& ctx, std::uint64_t id, int tag) {
    if (id != timer_) return;
    timer_ = kNoTimer;
    switch (tag) {
      case kElectionTag:
        // A candidate that stepped down on a newer term still owns its
        // requests.
        if (role_ == Role::Candidate ||
            (role_ == Role::Follower && (!pending_.empty() || (stand_in_ && !leader_))))
          start_election(ctx);
        break;
      case kWaitTag:
        if (role_ == Role::Follower && !pending_.empty()) start_election(ctx);
        break;
      case kRetransmitTag:
        if (role_ == Role::Leader && !idle()) {
          for (auto& [idx, info] : inflight_) ++info.rounds;
          broadcast_append(ctx, true);
          timer_ = ctx.set_timer(round_timeout(ctx), kRetransmitTag);
        }
        break;
    }
  }

  void on_crash() {
    role_ = Role::Follower;
    leader_.reset();
    stand_in_ = false;
    commit_ = 0;
    votes_.clear();
    next_.clear();
    match_.clear();
    inflight_.clear();
    pending_.clear();
    timer_ = kNoTimer;
  }

  void on_recover(NodeContext<Msg>& ctx) {
    commit_ = ctx.reg().size();
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::CatchUp{commit_}});
  }

  bool idle() const {
    return pending_.empty() && (role_ != Role::Leader || commit_ == log_.size());
  }

 private:
  static constexpr std::uint64_t kNoTimer = ~0ULL;
  static constexpr int kElectionTag = 0;
  static constexpr int kWaitTag = 1;
  static constexpr int kRetransmitTag = 2;

  struct Inflight {
    Tick start = 0;
    int rounds = 1;
  };

  Tick round_timeout(const NodeContext<Msg>& ctx) const {
    return std::max<Tick>(params_.retry_base, 4 * ctx.config().max_delay + 2);
  }

  Term last_term() const { return log_.empty() ? 0 : log_.back().term; }

  void arm_wait(NodeContext<Msg>& ctx) {
    if (timer_ == kNoTimer) timer_ = ctx.set_timer(ctx.backoff(round_timeout(ctx)), kWaitTag);
  }

  void become_follower(NodeContext<Msg>& ctx, Term t, std::optional<WriterId> leader) {
    const bool was_leader = role_ == Role::Leader;
    if (t > term_) {
      term_ = t;
      voted_for_.reset();
    }
    role_ = Role::Follower;
    inflight_.clear();
    if (leader) stand_in_ = false;
    if (leader && leader != leader_) {
      leader_ = leader;
      for (const auto& op : pending_) ctx.send(*leader_, Msg{msg::Forward{op}});
      timer_ = kNoTimer;
      if (!pending_.empty()) arm_wait(ctx);
    } else if (!leader) {
      leader_.reset();
      if (was_leader || timer_ == kNoTimer) {
        timer_ = kNoTimer;
        if (!pending_.empty()) arm_wait(ctx);
      }
    }
  }

  void start_election(NodeContext<Msg>& ctx) {
    ++term_;
    voted_for_ = self_;
    role_ = Role::Candidate;
    leader_.reset();
    votes_ = {self_};
    election_start_ = ctx.now();
    timer_ = ctx.set_timer(ctx.backoff(round_timeout(ctx)), kElectionTag);
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::RequestVote{term_, log_.size(), last_term()}});
    if (static_cast<int>(votes_.size()) >= majority(n_)) win(ctx);
  }

  void win(NodeContext<Msg>& ctx) {
    stand_in_ = false;
    role_ = Role::Leader;
    leader_ = self_;
    next_.assign(static_cast<std::size_t>(n_), log_.size());
    match_.assign(static_cast<std::size_t>(n_), 0);
    inflight_.clear();

    Metadata m;
    m.ballot = term_;
    WriteOp marker = make_meta_write(self_, next_seq_++, m, "");
    PassTrace p;
    p.path = {Stage::Pre};
    p.rtts_per_stage[Stage::Pre] = RoundTrips::whole(1);
    p.quorums = {Quorum{everyone(), Stage::Pre}};
    p.converged = {marker};
    p.arbiter_kind = ArbiterKind::Static;
    p.case_label = "electing";
    p.epoch = term_;
    p.start_tick = election_start_;
    ctx.emit_pass(std::move(p));

    // The marker doubles as the no-op that lets earlier-term entries commit.
    log_.push_back(Entry{term_, marker});
    for (const auto& op : pending_) lead(ctx, op, false);
    broadcast_append(ctx, true);
    advance_commit(ctx);
    timer_ = ctx.set_timer(round_timeout(ctx), kRetransmitTag);
  }

  std::set<WriterId> everyone() const {
    std::set<WriterId> all;
    for (WriterId w = 0; w < n_; ++w) all.insert(w);
    return all;
  }

  void lead(NodeContext<Msg>& ctx, const ClientOp& op, bool send = true) {
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
    log_.push_back(Entry{term_, std::move(w)});
    inflight_[log_.size()] = Inflight{ctx.now(), 1};
    if (send) {
      broadcast_append(ctx, false);
      advance_commit(ctx);
    }
    if (timer_ == kNoTimer) timer_ = ctx.set_timer(round_timeout(ctx), kRetransmitTag);
  }

  void send_append(NodeContext<Msg>& ctx, WriterId p) {
    std::size_t from = std::min(next_[static_cast<std::size_t>(p)], log_.size());
    msg::Append a{term_, from, from == 0 ? 0 : log_[from - 1].term,
                  {log_.begin() + static_cast<std::ptrdiff_t>(from), log_.end()}, commit_};
    ctx.send(p, Msg{std::move(a)});
  }

  /// `all`: include peers already known to be up to date (heartbeat/commit
  /// notification).
  void broadcast_append(NodeContext<Msg>& ctx, bool all) {
    for (WriterId w = 0; w < n_; ++w) {
      if (w == self_) continue;
      if (all || match_[static_cast<std::size_t>(w)] < log_.size()) send_append(ctx, w);
    }
  }

  void advance_commit(NodeContext<Msg>& ctx) {
    match_[static_cast<std::size_t>(self_)] = log_.size();
    std::size_t target = commit_;
    for (std::size_t len = log_.size(); len > commit_; --len) {
      if (log_[len - 1].term != term_) break;
      int count = 0;
      for (auto m : match_)
        if (m >= len) ++count;
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
      p.case_label = "elected";
      p.epoch = term_;
      p.start_tick = it->second.start;
      ctx.emit_pass(std::move(p));
      inflight_.erase(it);
    }
    commit_ = target;
    apply(ctx);
    broadcast_append(ctx, true);
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
    if (pending_.empty() && role_ == Role::Follower) timer_ = kNoTimer;
  }

  // --- handlers ---

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::RequestVote& m) {
    if (m.term > term_) become_follower(ctx, m.term, std::nullopt);
    bool up_to_date = m.last_term > last_term() ||
                      (m.last_term == last_term() && m.last_len >= log_.size());
    bool grant = m.term == term_ && up_to_date && (!voted_for_ || *voted_for_ == src);
    if (grant) voted_for_ = src;
    ctx.send(src, Msg{msg::Vote{term_, grant}});
    if (!up_to_date && role_ != Role::Leader) {
      // A stale candidate cannot win; someone with a fuller log has to.
      stand_in_ = true;
      if (timer_ == kNoTimer) timer_ = ctx.set_timer(ctx.backoff(round_timeout(ctx)), kElectionTag);
    }
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Vote& m) {
    if (m.term > term_) {
      become_follower(ctx, m.term, std::nullopt);
      return;
    }
    if (role_ != Role::Candidate || m.term != term_ || !m.granted) return;
    votes_.insert(src);
    if (static_cast<int>(votes_.size()) >= majority(n_)) win(ctx);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Append& m) {
    if (m.term < term_) {
      ctx.send(src, Msg{msg::AppendReply{term_, false, 0}});
      return;
    }
    if (role_ != Role::Follower || m.term > term_ || leader_ != src)
      become_follower(ctx, m.term, src);
    if (m.prev_len > log_.size() || (m.prev_len > 0 && log_[m.prev_len - 1].term != m.prev_term)) {
      std::size_t hint = std::min(log_.size(), m.prev_len == 0 ? 0 : m.prev_len - 1);
      ctx.send(src, Msg{msg::AppendReply{term_, false, std::min(hint, commit_)}});
      return;
    }
    for (std::size_t j = 0; j < m.entries.size(); ++j) {
      std::size_t idx = m.prev_len + j;
      if (idx < log_.size()) {
        if (log_[idx].term == m.entries[j].term) continue;
        log_.resize(idx);
      }
      log_.push_back(m.entries[j]);
    }
    std::size_t match = m.prev_len + m.entries.size();
    commit_ = std::max(commit_, std::min(m.commit, match));
    apply(ctx);
    ctx.send(src, Msg{msg::AppendReply{term_, true, match}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::AppendReply& m) {
    if (m.term > term_) {
      become_follower(ctx, m.term, std::nullopt);
      return;
    }
    if (role_ != Role::Leader || m.term != term_) return;
    auto p = static_cast<std::size_t>(src);
    if (m.success) {
      match_[p] = std::max(match_[p], m.match);
      next_[p] = std::max(next_[p], m.match);
      advance_commit(ctx);
    } else {
      next_[p] = std::min(next_[p], m.match);
      send_append(ctx, src);
    }
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Forward& m) {
    if (role_ != Role::Leader) return;
    for (const auto& e : log_)
      if (e.op.origin == m.op.id) {
        // Already ordered; the requester only needs to learn the commit.
        send_append(ctx, src);
        return;
      }
    lead(ctx, m.op);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::CatchUp& m) {
    if (m.from >= commit_) return;
    ctx.send(src, Msg{msg::CatchUpReply{m.from, {log_.begin() + static_cast<std::ptrdiff_t>(m.from),
                                                 log_.begin() + static_cast<std::ptrdiff_t>(commit_)}}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::CatchUpReply& m) {
    // Committed entries are final on every replica.
    for (std::size_t j = 0; j < m.entries.size(); ++j) {
      std::size_t idx = m.from + j;
      if (idx < log_.size() && log_[idx].term != m.entries[j].term) log_.resize(idx);
      if (idx == log_.size()) log_.push_back(m.entries[j]);
      commit_ = std::max(commit_, idx + 1);
    }
    apply(ctx);
  }

  WriterId self_;
  int n_;
  MechanismParams params_;

  // Stable storage.
  Term term_ = 0;
  std::optional<WriterId> voted_for_;
  std::vector<Entry> log_;
  std::uint64_t next_seq_ = 0;

  // Volatile.
  Role role_ = Role::Follower;
  std::optional<WriterId> leader_;
  bool stand_in_ = false;
  std::size_t commit_ = 0;
  std::set<WriterId> votes_;
  Tick election_start_ = 0;
  std::vector<std::size_t> next_;
  std::vector<std::size_t> match_;
  std::map<std::size_t, Inflight> inflight_;  // keyed by log length after append
  std::deque<ClientOp> pending_;
  std::uint64_t timer_ = kNoTimer;
};

struct Mechanism {
  using Msg = raft::Msg;
  using Node = raft::Node;
  using Params = MechanismParams;
  static int endpoints(int n, const Params&) { return n; }
  static ProjectionKind projection(const Params& p) { return p.projection; }
};

}  // namespace syncframe::raft
