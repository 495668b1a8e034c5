#pragma once

// Deterministic discrete-event network. Everything observable (deliveries,
// drops, faults, timers, harness events) is appended to a line-oriented
// trace whose FNV-1a digest identifies the execution.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "syncframe/core_model.hpp"
#include "syncframe/rng.hpp"

namespace syncframe {

// ---------------------------------------------------------------------------
// Fault plans

struct Crash {
  WriterId writer = 0;
  bool operator==(const Crash&) const = default;
};
struct Recover {
  WriterId writer = 0;
  bool operator==(const Recover&) const = default;
};
struct Partition {
  std::vector<std::set<WriterId>> groups;
  bool operator==(const Partition&) const = default;
};
struct Heal {
  bool operator==(const Heal&) const = default;
};

using FaultAction = std::variant<Crash, Recover, Partition, Heal>;

struct FaultEvent {
  Tick tick = 0;
  FaultAction action;
  bool operator==(const FaultEvent&) const = default;
};

class InvalidFaultPlan : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::string describe(const FaultAction& a) {
  struct V {
    std::string operator()(const Crash& c) const { return "crash " + std::to_string(c.writer); }
    std::string operator()(const Recover& r) const { return "recover " + std::to_string(r.writer); }
    std::string operator()(const Partition& p) const {
      std::string s = "partition";
      for (const auto& g : p.groups) {
        s += " {";
        bool first = true;
        for (auto w : g) {
          if (!first) s += ',';
          s += std::to_string(w);
          first = false;
        }
        s += '}';
      }
      return s;
    }
    std::string operator()(const Heal&) const { return "heal"; }
  };
  return std::visit(V{}, a);
}

/// Ordered list of fault actions. Construction sorts by tick (stable) and
/// rejects plans that crash a crashed writer, recover a live one, or use
/// partition groups that overlap or miss a writer.
class FaultPlan {
 public:
  FaultPlan() = default;
  explicit FaultPlan(std::vector<FaultEvent> events) : events_(std::move(events)) {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const FaultEvent& a, const FaultEvent& b) { return a.tick < b.tick; });
  }

  const std::vector<FaultEvent>& events() const { return events_; }
  bool empty() const { return events_.empty(); }

  void validate(int n) const {
    std::vector<bool> down(static_cast<std::size_t>(n), false);
    auto check_writer = [n](WriterId w) {
      if (w < 0 || w >= n)
        throw InvalidFaultPlan("fault plan names writer " + std::to_string(w) +
                               " outside [0," + std::to_string(n) + ")");
    };
    for (const auto& e : events_) {
      if (e.tick < 0) throw InvalidFaultPlan("negative fault tick");
      if (auto* c = std::get_if<Crash>(&e.action)) {
        check_writer(c->writer);
        if (down[c->writer])
          throw InvalidFaultPlan("writer " + std::to_string(c->writer) +
                                 " crashed while already down at tick " + std::to_string(e.tick));
        down[c->writer] = true;
      } else if (auto* r = std::get_if<Recover>(&e.action)) {
        check_writer(r->writer);
        if (!down[r->writer])
          throw InvalidFaultPlan("writer " + std::to_string(r->writer) +
                                 " recovered while live at tick " + std::to_string(e.tick));
        down[r->writer] = false;
      } else if (auto* p = std::get_if<Partition>(&e.action)) {
        std::set<WriterId> seen;
        std::size_t total = 0;
        for (const auto& g : p->groups) {
          if (g.empty()) throw InvalidFaultPlan("empty partition group");
          for (auto w : g) check_writer(w);
          total += g.size();
          seen.insert(g.begin(), g.end());
        }
        if (seen.size() != total) throw InvalidFaultPlan("partition groups overlap");
        if (static_cast<int>(seen.size()) != n)
          throw InvalidFaultPlan("partition groups do not cover all writers");
      }
    }
  }

 private:
  std::vector<FaultEvent> events_;
};

// ---------------------------------------------------------------------------
// Configuration

struct SimConfig {
  int n = 3;
  std::uint64_t seed = 1;
  Tick min_delay = 1;
  Tick max_delay = 1;
  /// Drop probability as the rational drop_num / drop_den.
  std::uint64_t drop_num = 0;
  std::uint64_t drop_den = 1;
  FaultPlan fault_plan;
  Tick max_ticks = 100000;

  void validate() const {
    if (n < 1) throw std::invalid_argument("n must be >= 1");
    if (min_delay < 1 || max_delay < min_delay)
      throw std::invalid_argument("delays must satisfy 1 <= min_delay <= max_delay");
    if (drop_den == 0 || drop_num > drop_den)
      throw std::invalid_argument("drop probability must lie in [0,1]");
    if (max_ticks < 1) throw std::invalid_argument("max_ticks must be positive");
    fault_plan.validate(n);
  }
};

// ---------------------------------------------------------------------------
// Trace

/// Line-delimited execution record `tick|kind|src|dst|summary`.
class TraceLog {
 public:
  void record(Tick tick, std::string_view kind, std::string src, std::string dst,
              std::string_view summary) {
    std::string line = std::to_string(tick);
    line += '|';
    line += kind;
    line += '|';
    line += src;
    line += '|';
    line += dst;
    line += '|';
    line += summary;
    digest_.update(line);
    digest_.update("\n");
    lines_.push_back(std::move(line));
  }
  void record(Tick tick, std::string_view kind, WriterId src, WriterId dst,
              std::string_view summary) {
    record(tick, kind, std::to_string(src), std::to_string(dst), summary);
  }

  const std::vector<std::string>& lines() const { return lines_; }
  std::uint64_t digest() const { return digest_.value(); }

 private:
  std::vector<std::string> lines_;
  Fnv1a64 digest_;
};

inline std::string hex_digest(std::uint64_t d) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
  return buf;
}

inline std::uint64_t digest_lines(const std::vector<std::string>& lines) {
  Fnv1a64 h;
  for (const auto& l : lines) {
    h.update(l);
    h.update("\n");
  }
  return h.value();
}

// ---------------------------------------------------------------------------
// Network

template <class P>
struct Envelope {
  WriterId src = 0;
  WriterId dst = 0;
  P payload;
  Tick send_tick = 0;
  Tick deliver_tick = 0;
  std::uint64_t seq = 0;  // per-sender sequence
};

struct TimerFire {
  WriterId node = 0;
  std::uint64_t id = 0;
  int tag = 0;
};

struct LocalRequest {
  WriterId node = 0;
  ClientOp op;
};

enum class SendResult { Queued, Dropped, Partitioned, SenderDown };
enum class StepStatus { Advanced, Exhausted, Timeout };

template <class P>
struct StepResult {
  StepStatus status = StepStatus::Exhausted;
  Tick tick = 0;
  std::vector<FaultAction> faults;
  std::vector<std::variant<Envelope<P>, LocalRequest, TimerFire>> events;

  std::vector<Envelope<P>> delivered() const {
    std::vector<Envelope<P>> out;
    for (const auto& e : events)
      if (auto* env = std::get_if<Envelope<P>>(&e)) out.push_back(*env);
    return out;
  }
};

/// Event queue over `endpoints` nodes. Writers are [0, n); further endpoints
/// are auxiliary (e.g. a shared memory) and never subject to faults.
///
/// Ordering inside one tick: fault actions first, then deliveries by
/// (src, dst, per-sender sequence), then client requests, then timers.
template <class P>
class Network {
 public:
  Network(SimConfig cfg, int endpoints)
      : cfg_(std::move(cfg)), endpoints_(endpoints), rng_(cfg_.seed),
        live_(static_cast<std::size_t>(endpoints), true),
        incarnation_(static_cast<std::size_t>(endpoints), 0),
        send_seq_(static_cast<std::size_t>(endpoints), 0),
        group_(static_cast<std::size_t>(endpoints), 0) {
    cfg_.validate();
    if (endpoints_ < cfg_.n) throw std::invalid_argument("fewer endpoints than writers");
  }

  const SimConfig& config() const { return cfg_; }
  int endpoints() const { return endpoints_; }
  Tick now() const { return now_; }
  bool is_live(WriterId w) const { return live_.at(static_cast<std::size_t>(w)); }
  TraceLog& trace() { return trace_; }
  const TraceLog& trace() const { return trace_; }
  Lcg64& rng() { return rng_; }

  SendResult send(WriterId src, WriterId dst, P payload) {
    const std::string summary = payload.summary();
    if (!is_live(src)) {
      trace_.record(now_, "DOWN", src, dst, summary);
      return SendResult::SenderDown;
    }
    if (!same_group(src, dst)) {
      trace_.record(now_, "PART", src, dst, summary);
      return SendResult::Partitioned;
    }
    if (rng_.bernoulli(cfg_.drop_num, cfg_.drop_den)) {
      trace_.record(now_, "DROP", src, dst, summary);
      return SendResult::Dropped;
    }
    Tick at = now_ + rng_.uniform(cfg_.min_delay, cfg_.max_delay);
    std::uint64_t seq = send_seq_[static_cast<std::size_t>(src)]++;
    trace_.record(now_, "SEND", src, dst, summary + " @" + std::to_string(at));
    queue_.emplace(Key{at, 0, src, dst, seq},
                   Envelope<P>{src, dst, std::move(payload), now_, at, seq});
    return SendResult::Queued;
  }

  std::uint64_t set_timer(WriterId node, Tick delay, int tag) {
    if (delay < 1) throw std::invalid_argument("timer delay must be positive");
    std::uint64_t id = next_timer_++;
    queue_.emplace(Key{now_ + delay, 2, node, node, id},
                   TimerEntry{TimerFire{node, id, tag}, incarnation_[static_cast<std::size_t>(node)]});
    return id;
  }

  void post_local(WriterId node, Tick at, ClientOp op) {
    if (at < now_) throw std::invalid_argument("client request in the past");
    queue_.emplace(Key{at, 1, node, node, next_local_++}, LocalRequest{node, std::move(op)});
  }

  /// True while faults, deliveries or client requests are scheduled. Timers
  /// and requests parked at crashed nodes do not count.
  bool has_pending_work() const {
    if (next_fault_ < cfg_.fault_plan.events().size()) return true;
    for (const auto& [key, entry] : queue_)
      if (!std::holds_alternative<TimerEntry>(entry)) return true;
    return false;
  }

  /// Client requests parked at a crashed node until it recovers.
  std::size_t deferred_count() const {
    std::size_t total = 0;
    for (const auto& d : deferred_) total += d.second.size();
    return total;
  }

  bool has_any_event() const {
    return next_fault_ < cfg_.fault_plan.events().size() || !queue_.empty();
  }

  StepResult<P> step() {
    StepResult<P> out;
    std::optional<Tick> next;
    if (!queue_.empty()) next = queue_.begin()->first.tick;
    const auto& faults = cfg_.fault_plan.events();
    if (next_fault_ < faults.size() && (!next || faults[next_fault_].tick < *next))
      next = faults[next_fault_].tick;
    if (!next) {
      out.status = StepStatus::Exhausted;
      out.tick = now_;
      return out;
    }
    if (*next > cfg_.max_ticks) {
      out.status = StepStatus::Timeout;
      out.tick = now_;
      return out;
    }
    now_ = std::max(now_, *next);
    out.status = StepStatus::Advanced;
    out.tick = now_;

    while (next_fault_ < faults.size() && faults[next_fault_].tick <= now_) {
      apply_fault(faults[next_fault_].action);
      out.faults.push_back(faults[next_fault_].action);
      ++next_fault_;
    }

    while (!queue_.empty() && queue_.begin()->first.tick == now_) {
      auto node = queue_.extract(queue_.begin());
      std::visit(
          [&](auto&& entry) {
            using T = std::decay_t<decltype(entry)>;
            if constexpr (std::is_same_v<T, Envelope<P>>) {
              if (!is_live(entry.dst)) {
                trace_.record(now_, "SUPPRESS", entry.src, entry.dst, entry.payload.summary());
              } else if (!same_group(entry.src, entry.dst)) {
                trace_.record(now_, "PART", entry.src, entry.dst, entry.payload.summary());
              } else {
                trace_.record(now_, "DELIVER", entry.src, entry.dst, entry.payload.summary());
                out.events.emplace_back(std::move(entry));
              }
            } else if constexpr (std::is_same_v<T, LocalRequest>) {
              if (!is_live(entry.node)) {
                deferred_[entry.node].push_back(std::move(entry.op));
              } else {
                out.events.emplace_back(std::move(entry));
              }
            } else {
              const auto idx = static_cast<std::size_t>(entry.fire.node);
              if (live_[idx] && entry.incarnation == incarnation_[idx]) {
                trace_.record(now_, "TIMER", entry.fire.node, entry.fire.node,
                              "tag=" + std::to_string(entry.fire.tag));
                out.events.emplace_back(entry.fire);
              }
            }
          },
          node.mapped());
    }
    return out;
  }

 private:
  struct Key {
    Tick tick;
    int cls;
    WriterId src;
    WriterId dst;
    std::uint64_t seq;
    auto operator<=>(const Key&) const = default;
  };
  struct TimerEntry {
    TimerFire fire;
    std::uint64_t incarnation;
  };
  using Entry = std::variant<Envelope<P>, LocalRequest, TimerEntry>;

  // Auxiliary endpoints are reachable from every partition group.
  bool same_group(WriterId a, WriterId b) const {
    if (a >= cfg_.n || b >= cfg_.n) return true;
    return group_[static_cast<std::size_t>(a)] == group_[static_cast<std::size_t>(b)];
  }

  void apply_fault(const FaultAction& a) {
    trace_.record(now_, "FAULT", "-", "-", describe(a));
    if (auto* c = std::get_if<Crash>(&a)) {
      live_[static_cast<std::size_t>(c->writer)] = false;
      ++incarnation_[static_cast<std::size_t>(c->writer)];
    } else if (auto* r = std::get_if<Recover>(&a)) {
      live_[static_cast<std::size_t>(r->writer)] = true;
      auto it = deferred_.find(r->writer);
      if (it != deferred_.end()) {
        for (auto& op : it->second) post_local(r->writer, now_, std::move(op));
        deferred_.erase(it);
      }
    } else if (auto* p = std::get_if<Partition>(&a)) {
      std::fill(group_.begin(), group_.end(), -1);
      int gi = 0;
      for (const auto& g : p->groups) {
        for (auto w : g) group_[static_cast<std::size_t>(w)] = gi;
        ++gi;
      }
    } else {
      std::fill(group_.begin(), group_.end(), 0);
    }
  }

  SimConfig cfg_;
  int endpoints_;
  Lcg64 rng_;
  Tick now_ = 0;
  std::vector<bool> live_;
  std::vector<std::uint64_t> incarnation_;
  std::vector<std::uint64_t> send_seq_;
  std::vector<int> group_;
  std::map<Key, Entry> queue_;
  std::size_t next_fault_ = 0;
  std::uint64_t next_timer_ = 0;
  std::uint64_t next_local_ = 0;
  std::map<WriterId, std::vector<ClientOp>> deferred_;
  TraceLog trace_;
};

}  // namespace syncframe
