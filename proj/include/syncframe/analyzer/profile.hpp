#pragma once

// Profile derivation from pass traces and the workloads that exercise every
// labelled case of a mechanism.

#include <algorithm>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "syncframe/analyzer/golden.hpp"
#include "syncframe/core_model.hpp"
#include "syncframe/mechanisms.hpp"

namespace syncframe {

class IncompleteCoverage : public std::runtime_error {
 public:
  IncompleteCoverage(std::vector<std::string> missing)
      : std::runtime_error(message(missing)), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  static std::string message(const std::vector<std::string>& m) {
    std::string s = "traces do not cover case(s):";
    for (const auto& c : m) s += " " + c;
    return s;
  }
  std::vector<std::string> missing_;
};

enum class LoadingRule {
  /// One entry per stage ("pre", "exe").
  ByStage,
  /// One entry per case label, from the pass's deciding (last) quorum.
  ByCase,
  /// A single "-" entry ranging over every quorum observed.
  All,
};

struct ProfileRules {
  std::vector<std::string> cases;
  /// Report one latency under "-" instead of one per case.
  bool collapse_latency = false;
  LoadingRule loading = LoadingRule::All;
};

inline ProfileRules profile_rules(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::Paxos:
    case MechanismKind::BrokenSubMajorityPaxos:
      return {{"-"}, true, LoadingRule::ByStage};
    case MechanismKind::Raft: return {{"electing", "elected"}, false, LoadingRule::All};
    case MechanismKind::VR: return {{"normal", "changing"}, false, LoadingRule::All};
    case MechanismKind::EPaxos:
    case MechanismKind::EPaxosPriority:
      return {{"fast", "slow"}, false, LoadingRule::ByCase};
    case MechanismKind::CrdtGCounter:
    case MechanismKind::CrdtOrSet:
      return {{"broadcast", "local"}, true, LoadingRule::All};
    case MechanismKind::AtomicCas: return {{"-"}, true, LoadingRule::All};
  }
  throw std::invalid_argument("unknown mechanism");
}

namespace detail {
inline void widen(std::map<std::string, LoadingRange>& m, const std::string& key, int size) {
  auto [it, fresh] = m.try_emplace(key, LoadingRange{size, size});
  if (!fresh) {
    it->second.lo = std::min(it->second.lo, size);
    it->second.hi = std::max(it->second.hi, size);
  }
}
}  // namespace detail

/// Writing freedom: within one leadership epoch, how many distinct writers
/// got value-carrying writes converged.
inline int measured_writing_freedom(const std::vector<PassTrace>& traces) {
  std::map<std::uint64_t, std::set<WriterId>> by_epoch;
  for (const auto& t : traces)
    for (const auto& w : t.converged)
      if (!w.value.is_phi()) by_epoch[t.epoch].insert(w.writer_id);
  std::size_t best = 0;
  for (const auto& [epoch, writers] : by_epoch) best = std::max(best, writers.size());
  return static_cast<int>(best);
}

inline MechanismProfile derive_profile(MechanismKind kind, const std::vector<PassTrace>& traces, int n) {
  const ProfileRules rules = profile_rules(kind);
  std::set<std::string> seen;
  for (const auto& t : traces) seen.insert(t.case_label);
  std::vector<std::string> missing;
  for (const auto& c : rules.cases)
    if (!seen.contains(c)) missing.push_back(c);
  if (!missing.empty()) throw IncompleteCoverage(missing);

  MechanismProfile p;
  p.consistency = classify_consistency(traces, true);
  p.writing_freedom = measured_writing_freedom(traces);
  p.fault_tolerance = declared_fault_tolerance(kind, n);
  for (const auto& t : traces) {
    const std::string label = rules.collapse_latency ? "-" : t.case_label;
    auto [it, fresh] = p.latency_rtt.try_emplace(label, t.total_rtts());
    if (!fresh) it->second = std::max(it->second, t.total_rtts());

    switch (rules.loading) {
      case LoadingRule::ByStage:
        for (const auto& q : t.quorums) detail::widen(p.loading, to_string(q.stage), static_cast<int>(q.size()));
        break;
      case LoadingRule::ByCase:
        if (!t.quorums.empty()) detail::widen(p.loading, t.case_label, static_cast<int>(t.quorums.back().size()));
        break;
      case LoadingRule::All:
        for (const auto& q : t.quorums) detail::widen(p.loading, "-", static_cast<int>(q.size()));
        break;
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Canonical workloads

struct CanonicalRun {
  SimConfig config;
  MechanismParams params;
  Workload workload;
};

/// Fault-free runs (plus one crash for VR) that together cover every case
/// label of `kind` with fixed one-way delay so round counts are clean.
inline std::vector<CanonicalRun> canonical_runs(MechanismKind kind, int n, std::uint64_t seed = 1) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  SimConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.min_delay = cfg.max_delay = 5;
  MechanismParams params = default_params(kind);
  const Tick gap = 60;

  auto staggered = [&](Tick start) {
    Workload w;
    for (WriterId i = 0; i < n; ++i)
      w.push_back({i, "k", std::to_string(i + 1), start + gap * i, OpKind::Write});
    return w;
  };

  std::vector<CanonicalRun> runs;
  switch (kind) {
    case MechanismKind::Paxos:
    case MechanismKind::BrokenSubMajorityPaxos:
    case MechanismKind::Raft:
      runs.push_back({cfg, params, staggered(0)});
      break;
    case MechanismKind::VR: {
      Workload w = staggered(0);
      const Tick crash = gap * n;
      cfg.fault_plan = FaultPlan({{crash, Crash{0}}});
      if (n > 1) {
        // The next request finds the leader gone and forces a view change.
        w.push_back({1 % n, "k", "after-crash", crash + gap, OpKind::Write});
        w.push_back({(n > 2 ? 2 : 1) % n, "k", "new-view", crash + 4 * gap, OpKind::Write});
      }
      runs.push_back({cfg, params, w});
      break;
    }
    case MechanismKind::EPaxos:
    case MechanismKind::EPaxosPriority: {
      Workload w = staggered(0);
      // Two writers racing on one key: each sees the other as a conflict.
      const Tick race = gap * n + gap;
      w.push_back({0, "k", "race-a", race, OpKind::Write});
      if (n > 1) w.push_back({1, "k", "race-b", race, OpKind::Write});
      runs.push_back({cfg, params, w});
      break;
    }
    case MechanismKind::CrdtGCounter:
    case MechanismKind::CrdtOrSet: {
      Workload w = staggered(0);
      // A burst from one writer converges as a single unordered batch.
      const Tick burst = gap * n;
      for (int i = 0; i < 3; ++i) w.push_back({0, "k", std::to_string(10 + i), burst, OpKind::Write});
      runs.push_back({cfg, params, w});
      MechanismParams local = params;
      local.fanout = 1;
      runs.push_back({cfg, local, staggered(0)});
      break;
    }
    case MechanismKind::AtomicCas: {
      Workload w;
      for (WriterId i = 0; i < n; ++i) w.push_back({i, "k", std::to_string(i + 1), 0, OpKind::Write});
      runs.push_back({cfg, params, w});
      break;
    }
  }
  return runs;
}

inline std::vector<PassTrace> canonical_traces(MechanismKind kind, int n, std::uint64_t seed = 1) {
  std::vector<PassTrace> out;
  for (const auto& run : canonical_runs(kind, n, seed)) {
    auto r = run_mechanism(run.config, run.params, run.workload);
    if (r.status != RunStatus::Quiescent)
      throw std::runtime_error("canonical run for " + to_string(kind) + " ended " + to_string(r.status));
    out.insert(out.end(), r.passes.begin(), r.passes.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Records and tables

struct ProfileRecord {
  std::string mechanism;
  std::string property;
  std::string case_label;
  std::string value;

  /// `mechanism|property|case|value`
  std::string to_line() const { return mechanism + "|" + property + "|" + case_label + "|" + value; }
  bool operator==(const ProfileRecord&) const = default;
};

inline std::vector<ProfileRecord> profile_records(MechanismKind kind, const MechanismProfile& p) {
  const std::string m = to_string(kind);
  std::vector<ProfileRecord> out;
  out.push_back({m, "consistency", "-", to_string(p.consistency)});
  out.push_back({m, "writing_freedom", "-", std::to_string(p.writing_freedom)});
  for (const auto& [c, r] : p.latency_rtt) out.push_back({m, "latency", c, r.to_string()});
  for (const auto& [c, l] : p.loading) out.push_back({m, "loading", c, l.to_string()});
  out.push_back({m, "fault_tolerance", "-", std::to_string(p.fault_tolerance)});
  return out;
}

/// Cells where `derived` differs from `expected`, as "property case:
/// derived vs expected".
inline std::vector<std::string> profile_diff(MechanismKind kind, const MechanismProfile& derived,
                                             const MechanismProfile& expected) {
  auto a = profile_records(kind, derived);
  auto b = profile_records(kind, expected);
  std::map<std::pair<std::string, std::string>, std::string> da, db;
  for (const auto& r : a) da[{r.property, r.case_label}] = r.value;
  for (const auto& r : b) db[{r.property, r.case_label}] = r.value;
  std::set<std::pair<std::string, std::string>> keys;
  for (const auto& [k, v] : da) keys.insert(k);
  for (const auto& [k, v] : db) keys.insert(k);
  std::vector<std::string> out;
  for (const auto& k : keys) {
    std::string x = da.contains(k) ? da[k] : "<absent>";
    std::string y = db.contains(k) ? db[k] : "<absent>";
    if (x != y) out.push_back(k.first + " " + k.second + ": derived " + x + " expected " + y);
  }
  return out;
}

namespace detail {
inline std::string join_cells(const std::map<std::string, std::string>& cells) {
  if (cells.size() == 1 && cells.begin()->first == "-") return cells.begin()->second;
  std::string s;
  for (const auto& [c, v] : cells) s += (s.empty() ? "" : ", ") + v + " " + c;
  return s;
}

/// Display width in code points.
inline std::size_t width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++w;
  return w;
}
}  // namespace detail

/// Aligned comparison table, one row per mechanism.
inline std::string render_table(const std::vector<std::pair<MechanismKind, MechanismProfile>>& rows,
                                const GoldenTable* golden = nullptr) {
  std::vector<std::vector<std::string>> cells = {
      {"mechanism", "consistency", "freedom", "latency (RTT)", "loading", "fault tolerance"}};
  for (const auto& [kind, p] : rows) {
    std::map<std::string, std::string> lat, load;
    for (const auto& [c, r] : p.latency_rtt) lat[c] = r.to_string();
    for (const auto& [c, l] : p.loading) load[c] = l.to_string();
    std::string cons = to_string(p.consistency);
    if (golden && golden->has(kind) && p.consistency == golden->row(kind).consistency)
      cons += " (" + golden->row(kind).consistency_symbol + ")";
    cells.push_back({to_string(kind), cons, std::to_string(p.writing_freedom), detail::join_cells(lat),
                     detail::join_cells(load), std::to_string(p.fault_tolerance)});
  }
  std::vector<std::size_t> widths(cells[0].size(), 0);
  for (const auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], detail::width(row[i]));
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      line += row[i];
      if (i + 1 < row.size()) line += std::string(widths[i] - detail::width(row[i]) + 2, ' ');
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace syncframe
