#pragma once

// Drives one mechanism instance per endpoint over a Network until the
// system quiesces, recording history, commits and pass traces.

#include <concepts>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "syncframe/core_model.hpp"
#include "syncframe/simnet.hpp"

namespace syncframe {

struct WorkloadItem {
  WriterId writer = 0;
  std::string key = "k";
  std::string value;
  Tick issue_tick = 0;
  OpKind kind = OpKind::Write;

  bool operator==(const WorkloadItem&) const = default;
};

using Workload = std::vector<WorkloadItem>;

enum class RunStatus { Quiescent, Timeout, Stalled };

inline std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Quiescent: return "quiescent";
    case RunStatus::Timeout: return "timeout";
    case RunStatus::Stalled: return "stalled";
  }
  return "?";
}

struct RunResult {
  RunStatus status = RunStatus::Quiescent;
  Tick end_tick = 0;
  History history;
  std::vector<PassTrace> passes;
  /// One register per endpoint (writers first, then auxiliary endpoints).
  std::vector<Register> registers;
  std::set<WriterId> live;
  std::vector<std::string> trace;
  std::uint64_t digest = 0;

  /// Writer replicas only.
  std::vector<Register> writer_registers(int n) const {
    return {registers.begin(), registers.begin() + n};
  }
};

inline std::string describe(const ClientOp& op) {
  std::string s = "req=" + std::to_string(op.id) + " " + to_string(op.kind) + " " + op.key;
  if (op.kind != OpKind::Read) s += "=" + op.value;
  return s;
}

inline std::string describe(const WriteOp& w) {
  return syncframe::to_string(w.id()) + " " + w.key + "=" + w.value.to_string();
}

/// State shared by every node context of one run.
template <class Msg>
class SimCore {
 public:
  SimCore(SimConfig cfg, int endpoints, ProjectionKind projection)
      : net(std::move(cfg), endpoints) {
    for (int i = 0; i < endpoints; ++i) registers.emplace_back(i, projection);
    delivered.resize(static_cast<std::size_t>(endpoints));
  }

  Network<Msg> net;
  std::vector<Register> registers;
  History history;
  std::vector<PassTrace> passes;
  /// Client requests handed to each node and not yet answered.
  std::vector<std::vector<ClientOp>> delivered;
};

/// The mechanism's view of the simulator: everything a node may do in
/// response to an input.
template <class Msg>
class NodeContext {
 public:
  NodeContext(SimCore<Msg>& core, WriterId self) : core_(&core), self_(self) {}

  Tick now() const { return core_->net.now(); }
  int n() const { return core_->net.config().n; }
  WriterId self() const { return self_; }
  const SimConfig& config() const { return core_->net.config(); }

  void send(WriterId dst, Msg m) { core_->net.send(self_, dst, std::move(m)); }

  std::uint64_t set_timer(Tick delay, int tag) {
    return core_->net.set_timer(self_, delay, tag);
  }

  /// Seeded randomized backoff in [base, 2*base].
  Tick backoff(Tick base) { return core_->net.rng().uniform(base, 2 * base); }

  const Register& reg() const { return core_->registers[static_cast<std::size_t>(self_)]; }

  void commit(WriteOp w) {
    core_->net.trace().record(now(), "COMMIT", self_, self_, describe(w));
    core_->history.commit(now(), self_, w);
    core_->registers[static_cast<std::size_t>(self_)].append_committed(std::move(w));
  }

  /// Answers a client request issued at this node. Repeated answers are
  /// ignored (a request may complete through several paths after recovery).
  void respond(RequestId id, OpResult result) {
    if (core_->history.responded(id) || !core_->history.invoked(id)) return;
    std::string summary = "req=" + std::to_string(id) +
                          (result.status == OpResult::Status::Ok ? " ok" : " aborted");
    if (result.read_value) summary += " -> " + *result.read_value;
    core_->net.trace().record(now(), "RESPOND", self_, self_, summary);
    core_->history.respond(now(), self_, id, std::move(result));
    auto& mine = core_->delivered[static_cast<std::size_t>(self_)];
    std::erase_if(mine, [id](const ClientOp& op) { return op.id == id; });
  }

  bool answered(RequestId id) const { return core_->history.responded(id); }

  void emit_pass(PassTrace p) {
    p.pass_index = core_->passes.size();
    p.driver = self_;
    if (p.end_tick == 0) p.end_tick = now();
    validate_pass(p);
    std::string summary = "#" + std::to_string(p.pass_index) + " " + p.case_label +
                          " rtt=" + p.total_rtts().to_string() + " |w|=" +
                          std::to_string(p.converged.size());
    core_->net.trace().record(now(), "PASS", self_, self_, summary);
    core_->passes.push_back(std::move(p));
  }

 private:
  SimCore<Msg>* core_;
  WriterId self_;
};

template <class M>
concept MechanismModel = requires(typename M::Node node, const typename M::Node cnode,
                                  NodeContext<typename M::Msg>& ctx,
                                  const typename M::Msg& msg, const ClientOp& op,
                                  const typename M::Params& params) {
  { M::endpoints(1, params) } -> std::convertible_to<int>;
  { M::projection(params) } -> std::same_as<ProjectionKind>;
  { msg.summary() } -> std::convertible_to<std::string>;
  node.on_client(ctx, op);
  node.on_message(ctx, WriterId{}, msg);
  node.on_timer(ctx, std::uint64_t{}, int{});
  node.on_crash();
  node.on_recover(ctx);
  { cnode.idle() } -> std::convertible_to<bool>;
};

/// Runs `workload` under mechanism M until no faults, deliveries or client
/// requests remain and every live node reports idle; pending timers of an
/// idle system are discarded. Stops early on max_ticks (Timeout) or when
/// nothing at all is scheduled while work is outstanding (Stalled).
template <MechanismModel M>
RunResult run_until_quiescent(const SimConfig& cfg, const typename M::Params& params,
                              const Workload& workload) {
  const int endpoints = M::endpoints(cfg.n, params);
  SimCore<typename M::Msg> core(cfg, endpoints, M::projection(params));
  using Ctx = NodeContext<typename M::Msg>;

  for (std::size_t i = 0; i < workload.size(); ++i) {
    const auto& item = workload[i];
    if (item.writer < 0 || item.writer >= cfg.n)
      throw std::invalid_argument("workload writer out of range");
    core.net.post_local(item.writer, item.issue_tick,
                        ClientOp{static_cast<RequestId>(i), item.writer, item.kind, item.key,
                                 item.value});
  }

  std::vector<std::unique_ptr<typename M::Node>> nodes;
  for (int i = 0; i < endpoints; ++i)
    nodes.push_back(std::make_unique<typename M::Node>(i, cfg.n, params));
  for (int i = 0; i < endpoints; ++i) {
    Ctx ctx(core, i);
    if constexpr (requires { nodes[0]->on_start(ctx); }) nodes[static_cast<std::size_t>(i)]->on_start(ctx);
  }

  auto quiescent = [&] {
    if (core.net.has_pending_work()) return false;
    for (int i = 0; i < endpoints; ++i)
      if (core.net.is_live(i) && !nodes[static_cast<std::size_t>(i)]->idle()) return false;
    return true;
  };

  RunResult out;
  for (;;) {
    if (quiescent()) {
      out.status = RunStatus::Quiescent;
      break;
    }
    auto step = core.net.step();
    if (step.status == StepStatus::Timeout) {
      out.status = RunStatus::Timeout;
      break;
    }
    if (step.status == StepStatus::Exhausted) {
      out.status = RunStatus::Stalled;
      break;
    }
    for (const auto& f : step.faults) {
      if (auto* c = std::get_if<Crash>(&f)) {
        nodes[static_cast<std::size_t>(c->writer)]->on_crash();
      } else if (auto* r = std::get_if<Recover>(&f)) {
        Ctx ctx(core, r->writer);
        nodes[static_cast<std::size_t>(r->writer)]->on_recover(ctx);
        // The client side is durable: requests that reached the node before
        // the crash and were never answered are submitted again.
        auto again = core.delivered[static_cast<std::size_t>(r->writer)];
        core.delivered[static_cast<std::size_t>(r->writer)].clear();
        for (auto& op : again) core.net.post_local(r->writer, core.net.now(), std::move(op));
      }
    }
    for (auto& ev : step.events) {
      if (auto* env = std::get_if<Envelope<typename M::Msg>>(&ev)) {
        Ctx ctx(core, env->dst);
        nodes[static_cast<std::size_t>(env->dst)]->on_message(ctx, env->src, env->payload);
      } else if (auto* local = std::get_if<LocalRequest>(&ev)) {
        Ctx ctx(core, local->node);
        if (core.history.responded(local->op.id)) continue;
        if (!core.history.invoked(local->op.id)) {
          core.net.trace().record(core.net.now(), "INVOKE", local->node, local->node,
                                  describe(local->op));
          core.history.invoke(core.net.now(), local->node, local->op);
        }
        core.delivered[static_cast<std::size_t>(local->node)].push_back(local->op);
        nodes[static_cast<std::size_t>(local->node)]->on_client(ctx, local->op);
      } else if (auto* timer = std::get_if<TimerFire>(&ev)) {
        Ctx ctx(core, timer->node);
        nodes[static_cast<std::size_t>(timer->node)]->on_timer(ctx, timer->id, timer->tag);
      }
    }
  }

  out.end_tick = core.net.now();
  out.history = std::move(core.history);
  out.passes = std::move(core.passes);
  out.registers = std::move(core.registers);
  for (int i = 0; i < cfg.n; ++i)
    if (core.net.is_live(i)) out.live.insert(i);
  out.trace = core.net.trace().lines();
  out.digest = core.net.trace().digest();
  return out;
}

}  // namespace syncframe
