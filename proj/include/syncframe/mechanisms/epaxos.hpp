#pragma once

// Leaderless EPaxos over a dependency graph, plus the priority-tree variant.
// Every write owns an instance at its writer; conflicts (same key) are
// recorded as dependencies and replicas execute the committed graph in the
// same deterministic order. All writing happens on the [Exe] path.

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "syncframe/harness.hpp"
#include "syncframe/mechanisms/common.hpp"

namespace syncframe::epaxos {

struct InstanceId {
  WriterId leader = 0;
  std::uint64_t index = 0;
  auto operator<=>(const InstanceId&) const = default;
};

inline std::string to_string(const InstanceId& i) {
  return std::to_string(i.leader) + "." + std::to_string(i.index);
}

using Deps = std::set<InstanceId>;

inline std::string to_string(const Deps& d) {
  std::string s = "{";
  bool first = true;
  for (const auto& i : d) {
    if (!first) s += ',';
    s += to_string(i);
    first = false;
  }
  return s + "}";
}

struct CommittedInstance {
  InstanceId id;
  WriteOp cmd;
  Deps deps;
};

namespace msg {
struct PreAccept {
  InstanceId id;
  WriteOp cmd;
  Deps deps;
};
struct PreAcceptOk {
  InstanceId id;
  Deps deps;
  bool committed;
};
struct Accept {
  InstanceId id;
  WriteOp cmd;
  Deps deps;
};
struct AcceptOk {
  InstanceId id;
};
struct Commit {
  InstanceId id;
  WriteOp cmd;
  Deps deps;
};
struct CatchUp {};
struct CatchUpReply {
  std::vector<CommittedInstance> instances;
};
}  // namespace msg

struct Msg {
  std::variant<msg::PreAccept, msg::PreAcceptOk, msg::Accept, msg::AcceptOk, msg::Commit,
               msg::CatchUp, msg::CatchUpReply>
      body;

  std::string summary() const {
    struct V {
      std::string operator()(const msg::PreAccept& m) const {
        return "pre-accept " + to_string(m.id) + " " + describe(m.cmd) + " deps=" + to_string(m.deps);
      }
      std::string operator()(const msg::PreAcceptOk& m) const {
        return "pre-accept-ok " + to_string(m.id) + " deps=" + to_string(m.deps) +
               (m.committed ? " committed" : "");
      }
      std::string operator()(const msg::Accept& m) const {
        return "accept " + to_string(m.id) + " deps=" + to_string(m.deps);
      }
      std::string operator()(const msg::AcceptOk& m) const { return "accept-ok " + to_string(m.id); }
      std::string operator()(const msg::Commit& m) const {
        return "commit " + to_string(m.id) + " " + describe(m.cmd) + " deps=" + to_string(m.deps);
      }
      std::string operator()(const msg::CatchUp&) const { return "catchup"; }
      std::string operator()(const msg::CatchUpReply& m) const {
        return "catchup-reply n=" + std::to_string(m.instances.size());
      }
    };
    return std::visit(V{}, body);
  }
};

enum class InstanceStatus { PreAccepted, Accepted, Committed };

struct Instance {
  WriteOp cmd;
  Deps deps;
  InstanceStatus status = InstanceStatus::PreAccepted;
  bool executed = false;
};

/// Execution order inside one strongly connected component of the committed
/// dependency graph.
struct ComponentOrder {
  const PriorityTree* priority = nullptr;
  bool operator()(const WriteOp& a, const WriteOp& b) const {
    if (priority) {
      int ra = priority->rank(a.writer_id), rb = priority->rank(b.writer_id);
      if (ra != rb) return ra < rb;
    }
    return std::tie(a.writer_id, a.op_seq) < std::tie(b.writer_id, b.op_seq);
  }
};

/// Ring quorum starting at `leader`: the leader and its next size-1
/// successors.
inline std::set<WriterId> ring_quorum(WriterId leader, int size, int n) {
  std::set<WriterId> q;
  for (int i = 0; i < size; ++i) q.insert((leader + i) % n);
  return q;
}

class Node {
 public:
  Node(WriterId self, int n, const MechanismParams& params)
      : self_(self), n_(n), params_(params),
        priority_mode_(params.kind == MechanismKind::EPaxosPriority) {
    if (priority_mode_) tree_ = params.priority ? *params.priority : PriorityTree::flat(n);
    fast_size_ = quorum_size(MechanismKind::EPaxos, Stage::Exe, "fast", n, params.fast_quorum);
    slow_size_ = quorum_size(MechanismKind::EPaxos, Stage::Exe, "slow", n);
  }

  const std::map<InstanceId, Instance>& instances() const { return instances_; }
  int fast_quorum_size() const { return fast_size_; }

  void on_client(NodeContext<Msg>& ctx, const ClientOp& op) {
    for (const auto& p : pending_)
      if (p.id == op.id) return;
    pending_.push_back(op);

    auto known = requests_.find(op.id);
    if (known != requests_.end()) {
      const Instance& inst = instances_.at(known->second);
      if (inst.status == InstanceStatus::Committed) {
        if (op.kind != OpKind::Read || inst.executed) finish(ctx, op, inst.cmd);
        return;
      }
      start_attempt(ctx, known->second);
      return;
    }
    InstanceId id{self_, next_index_++};
    WriteOp cmd;
    if (op.kind == OpKind::Read) {
      Metadata m;
      m.logical_time = op.id;
      cmd = make_meta_write(self_, next_seq_++, m, op.key, op.id);
    } else {
      cmd = make_write(self_, next_seq_++, op.key, op.value, {}, op.id);
    }
    requests_[op.id] = id;
    Instance inst;
    inst.deps = conflicts(cmd.key, id);
    inst.cmd = std::move(cmd);
    record(id, std::move(inst));
    start_attempt(ctx, id);
  }

  void on_message(NodeContext<Msg>& ctx, WriterId src, const Msg& m) {
    std::visit([&](const auto& body) { handle(ctx, src, body); }, m.body);
  }

  void on_timer(NodeContext<Msg>& ctx, std::uint64_t id, int /*tag*/) {
    auto t = timers_.find(id);
    if (t == timers_.end()) return;
    InstanceId inst = t->second;
    timers_.erase(t);
    auto it = attempts_.find(inst);
    if (it == attempts_.end()) return;
    Attempt& a = it->second;
    // Some quorum member is slow or down: widen the round to every replica
    // and settle for a majority.
    a.widened = true;
    ++a.rounds;
    const Instance& ins = instances_.at(inst);
    for (WriterId w = 0; w < n_; ++w) {
      if (w == self_) continue;
      if (a.phase == Phase::PreAccept) ctx.send(w, Msg{msg::PreAccept{inst, ins.cmd, a.initial}});
      else ctx.send(w, Msg{msg::Accept{inst, ins.cmd, a.accept_deps}});
    }
    arm(ctx, inst);
  }

  void on_crash() {
    attempts_.clear();
    timers_.clear();
    pending_.clear();
  }

  void on_recover(NodeContext<Msg>& ctx) {
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::CatchUp{}});
  }

  bool idle() const { return pending_.empty(); }

 private:
  enum class Phase { PreAccept, Accept };

  struct Attempt {
    Phase phase = Phase::PreAccept;
    Deps initial;
    std::map<WriterId, Deps> replies;
    std::set<WriterId> acks;
    Deps accept_deps;
    std::set<WriterId> fast_quorum;
    std::set<WriterId> accept_quorum;
    bool widened = false;
    int rounds = 1;
    Tick start = 0;
  };

  Tick round_timeout(const NodeContext<Msg>& ctx) const {
    return std::max<Tick>(params_.retry_base, 4 * ctx.config().max_delay + 2);
  }

  void arm(NodeContext<Msg>& ctx, InstanceId id) {
    timers_[ctx.set_timer(round_timeout(ctx), 0)] = id;
  }

  Deps conflicts(const std::string& key, InstanceId except) const {
    Deps d;
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return d;
    for (const auto& i : it->second)
      if (i != except) d.insert(i);
    return d;
  }

  void record(InstanceId id, Instance inst) {
    by_key_[inst.cmd.key].insert(id);
    instances_[id] = std::move(inst);
  }

  void start_attempt(NodeContext<Msg>& ctx, InstanceId id) {
    Attempt a;
    a.initial = instances_.at(id).deps;
    a.fast_quorum = ring_quorum(self_, fast_size_, n_);
    a.accept_quorum = ring_quorum(self_, slow_size_, n_);
    a.start = ctx.now();
    attempts_[id] = std::move(a);
    const Instance& inst = instances_.at(id);
    for (WriterId w : attempts_.at(id).fast_quorum)
      if (w != self_) ctx.send(w, Msg{msg::PreAccept{id, inst.cmd, inst.deps}});
    arm(ctx, id);
    if (fast_size_ == 1) decide_preaccept(ctx, id);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::PreAccept& m) {
    auto it = instances_.find(m.id);
    if (it != instances_.end() && it->second.status != InstanceStatus::PreAccepted) {
      ctx.send(src, Msg{msg::PreAcceptOk{m.id, it->second.deps,
                                          it->second.status == InstanceStatus::Committed}});
      return;
    }
    Deps deps = m.deps;
    Deps local = conflicts(m.cmd.key, m.id);
    deps.insert(local.begin(), local.end());
    Instance inst;
    inst.cmd = m.cmd;
    inst.deps = deps;
    record(m.id, std::move(inst));
    ctx.send(src, Msg{msg::PreAcceptOk{m.id, deps, false}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::PreAcceptOk& m) {
    auto it = attempts_.find(m.id);
    if (it == attempts_.end() || it->second.phase != Phase::PreAccept) return;
    if (m.committed) {
      commit(ctx, m.id, m.deps, std::nullopt);
      return;
    }
    it->second.replies[src] = m.deps;
    decide_preaccept(ctx, m.id);
  }

  void decide_preaccept(NodeContext<Msg>& ctx, InstanceId id) {
    Attempt& a = attempts_.at(id);
    const int needed = a.widened ? slow_size_ - 1 : fast_size_ - 1;
    int have = 0;
    for (const auto& [w, d] : a.replies)
      if (a.widened || a.fast_quorum.contains(w)) ++have;
    if (have < needed) return;

    bool identical = !a.widened;
    Deps all = a.initial;
    for (const auto& [w, d] : a.replies) {
      if (d != a.initial) identical = false;
      all.insert(d.begin(), d.end());
    }
    if (identical) {
      commit(ctx, id, all, "fast");
      return;
    }
    if (priority_mode_) {
      // Divergent reports are ordered locally by the priority tree, so the
      // union is final; the accept round only spreads it in the background.
      const Instance& inst = instances_.at(id);
      for (WriterId w : a.accept_quorum)
        if (w != self_) ctx.send(w, Msg{msg::Accept{id, inst.cmd, all}});
      commit(ctx, id, all, "slow");
      return;
    }
    a.phase = Phase::Accept;
    a.accept_deps = all;
    a.acks = {self_};
    ++a.rounds;
    Instance& inst = instances_.at(id);
    inst.deps = all;
    inst.status = InstanceStatus::Accepted;
    for (WriterId w : a.accept_quorum)
      if (w != self_) ctx.send(w, Msg{msg::Accept{id, inst.cmd, all}});
    if (static_cast<int>(a.acks.size()) >= slow_size_) commit(ctx, id, all, "slow");
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::Accept& m) {
    auto it = instances_.find(m.id);
    if (it != instances_.end() && it->second.status == InstanceStatus::Committed) {
      ctx.send(src, Msg{msg::AcceptOk{m.id}});
      return;
    }
    if (it == instances_.end()) {
      Instance inst;
      inst.cmd = m.cmd;
      record(m.id, std::move(inst));
      it = instances_.find(m.id);
    }
    it->second.deps = m.deps;
    it->second.status = InstanceStatus::Accepted;
    ctx.send(src, Msg{msg::AcceptOk{m.id}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::AcceptOk& m) {
    auto it = attempts_.find(m.id);
    if (it == attempts_.end() || it->second.phase != Phase::Accept) return;
    it->second.acks.insert(src);
    if (static_cast<int>(it->second.acks.size()) >= slow_size_)
      commit(ctx, m.id, it->second.accept_deps, "slow");
  }

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::Commit& m) {
    learn(ctx, m.id, m.cmd, m.deps);
  }

  void handle(NodeContext<Msg>& ctx, WriterId src, const msg::CatchUp&) {
    std::vector<CommittedInstance> out;
    for (const auto& [id, inst] : instances_)
      if (inst.status == InstanceStatus::Committed) out.push_back({id, inst.cmd, inst.deps});
    if (!out.empty()) ctx.send(src, Msg{msg::CatchUpReply{std::move(out)}});
  }

  void handle(NodeContext<Msg>& ctx, WriterId /*src*/, const msg::CatchUpReply& m) {
    for (const auto& c : m.instances) learn(ctx, c.id, c.cmd, c.deps, false);
    execute(ctx);
  }

  /// Commits an instance this node leads. `label` is empty when the commit
  /// was learnt from a replica that already had it.
  void commit(NodeContext<Msg>& ctx, InstanceId id, const Deps& deps,
              std::optional<std::string> label) {
    auto node = attempts_.extract(id);
    Attempt& a = node.mapped();
    const WriteOp cmd = instances_.at(id).cmd;
    if (label) {
      PassTrace p;
      p.path = {Stage::Exe};
      p.rtts_per_stage[Stage::Exe] = RoundTrips::whole(a.rounds);
      p.quorums = {Quorum{a.fast_quorum, Stage::Exe}};
      if (*label == "slow") p.quorums.push_back(Quorum{a.accept_quorum, Stage::Exe});
      p.converged = {cmd};
      p.arbiter_kind = ArbiterKind::Dynamic;
      p.case_label = *label;
      p.start_tick = a.start;
      ctx.emit_pass(std::move(p));
    }
    for (WriterId w = 0; w < n_; ++w)
      if (w != self_) ctx.send(w, Msg{msg::Commit{id, cmd, deps}});
    learn(ctx, id, cmd, deps);
  }

  void learn(NodeContext<Msg>& ctx, InstanceId id, const WriteOp& cmd, const Deps& deps,
             bool run = true) {
    auto it = instances_.find(id);
    if (it == instances_.end()) {
      record(id, Instance{cmd, deps, InstanceStatus::Committed, false});
    } else if (it->second.status != InstanceStatus::Committed) {
      it->second.cmd = cmd;
      it->second.deps = deps;
      it->second.status = InstanceStatus::Committed;
    } else {
      return;
    }
    attempts_.erase(id);
    // Writes are answered once their position in the graph is fixed.
    if (cmd.origin && id.leader == self_)
      for (const auto& op : pending_)
        if (op.id == *cmd.origin && op.kind != OpKind::Read) {
          finish(ctx, op, cmd);
          break;
        }
    if (run) execute(ctx);
  }

  void finish(NodeContext<Msg>& ctx, const ClientOp& op, const WriteOp& /*cmd*/) {
    OpResult r;
    if (op.kind == OpKind::Read) r.read_value = ctx.reg().project(op.key).to_string();
    const RequestId rid = op.id;
    ctx.respond(rid, r);
    std::erase_if(pending_, [rid](const ClientOp& p) { return p.id == rid; });
  }

  /// Executes every committed instance whose dependency closure is fully
  /// committed, strongly connected components first-to-last in dependency
  /// order.
  void execute(NodeContext<Msg>& ctx) {
    std::map<InstanceId, int> index, low;
    std::set<InstanceId> on_stack, blocked;
    std::vector<InstanceId> stack;
    int counter = 0;

    // Returns false if the closure of v reaches an instance that is not
    // committed yet.
    std::function<bool(InstanceId)> visit = [&](InstanceId v) -> bool {
      index[v] = low[v] = counter++;
      stack.push_back(v);
      on_stack.insert(v);
      bool ok = true;
      for (const auto& d : instances_.at(v).deps) {
        auto it = instances_.find(d);
        if (it == instances_.end() || it->second.status != InstanceStatus::Committed ||
            blocked.contains(d)) {
          ok = false;
          continue;
        }
        if (it->second.executed) continue;
        if (!index.contains(d)) {
          if (!visit(d)) ok = false;
          low[v] = std::min(low[v], low[d]);
        } else if (on_stack.contains(d)) {
          low[v] = std::min(low[v], index[d]);
        }
      }
      if (low[v] == index[v]) {
        std::vector<InstanceId> comp;
        InstanceId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack.erase(w);
          comp.push_back(w);
        } while (w != v);
        if (!ok) {
          blocked.insert(comp.begin(), comp.end());
          return false;
        }
        // A component reached through a blocked path may still miss members;
        // only run it once everything it depends on has run.
        for (const auto& c : comp)
          for (const auto& d : instances_.at(c).deps)
            if (!instances_.at(d).executed && !std::count(comp.begin(), comp.end(), d)) ok = false;
        if (!ok) {
          blocked.insert(comp.begin(), comp.end());
          return false;
        }
        std::vector<InstanceId> order = comp;
        ComponentOrder less{priority_mode_ ? &tree_ : nullptr};
        std::sort(order.begin(), order.end(), [&](const InstanceId& a, const InstanceId& b) {
          return less(instances_.at(a).cmd, instances_.at(b).cmd);
        });
        for (const auto& id : order) run(ctx, id);
      }
      return ok;
    };

    for (const auto& [id, inst] : instances_) {
      if (inst.status != InstanceStatus::Committed || inst.executed || index.contains(id)) continue;
      visit(id);
    }
  }

  void run(NodeContext<Msg>& ctx, InstanceId id) {
    Instance& inst = instances_.at(id);
    inst.executed = true;
    ctx.commit(inst.cmd);
    if (inst.cmd.origin && id.leader == self_)
      for (const auto& op : pending_)
        if (op.id == *inst.cmd.origin && op.kind == OpKind::Read) {
          finish(ctx, op, inst.cmd);
          break;
        }
  }

  WriterId self_;
  int n_;
  MechanismParams params_;
  bool priority_mode_;
  PriorityTree tree_;
  int fast_size_ = 1;
  int slow_size_ = 1;

  // Stable storage.
  std::map<InstanceId, Instance> instances_;
  std::map<std::string, std::set<InstanceId>> by_key_;
  std::map<RequestId, InstanceId> requests_;
  std::uint64_t next_index_ = 0;
  std::uint64_t next_seq_ = 0;

  // Volatile.
  std::map<InstanceId, Attempt> attempts_;
  std::map<std::uint64_t, InstanceId> timers_;
  std::deque<ClientOp> pending_;
};

struct Mechanism {
  using Msg = epaxos::Msg;
  using Node = epaxos::Node;
  using Params = MechanismParams;
  static int endpoints(int n, const Params&) { return n; }
  static ProjectionKind projection(const Params& p) { return p.projection; }
};

}  // namespace syncframe::epaxos
