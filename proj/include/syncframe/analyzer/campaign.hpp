#pragma once

// Seeded crash campaigns: each seed replays a fault-free baseline, picks a
// pass, and crashes f writers around it (right after its first stage,
// inside its last stage, or after it settles).

#include <algorithm>
#include <atomic>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "syncframe/checkers.hpp"
#include "syncframe/mechanisms.hpp"
#include "syncframe/rng.hpp"

namespace syncframe {

enum class CrashPhase { AfterPre, MidExe, Settled };

inline std::string to_string(CrashPhase p) {
  switch (p) {
    case CrashPhase::AfterPre: return "after-pre";
    case CrashPhase::MidExe: return "mid-exe";
    case CrashPhase::Settled: return "settled";
  }
  return "?";
}

struct CampaignCase {
  std::uint64_t seed = 0;
  SimConfig config;
  MechanismParams params;
  Workload workload;
  std::string scenario;
};

struct CampaignRun {
  CampaignCase setup;
  RunStatus status = RunStatus::Quiescent;
  Verdict progress;
  Verdict safety;
};

struct CampaignSummary {
  std::size_t runs = 0;
  std::size_t progress_failures = 0;
  std::size_t safety_failures = 0;
  std::vector<CampaignRun> failed;

  std::string to_line() const {
    return "runs=" + std::to_string(runs) + " progress_failures=" + std::to_string(progress_failures) +
           " safety_failures=" + std::to_string(safety_failures);
  }
};

inline Workload campaign_workload(MechanismKind kind, int n, Lcg64& rng) {
  Workload w;
  for (WriterId i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) {
      std::string value = kind == MechanismKind::CrdtGCounter ? "1" : "v" + std::to_string(i) + "." + std::to_string(j);
      w.push_back({i, "k", value, rng.uniform(0, 200), OpKind::Write});
    }
  std::stable_sort(w.begin(), w.end(), [](const auto& a, const auto& b) { return a.issue_tick < b.issue_tick; });
  return w;
}

/// Two halves of a cluster, each proposing on its own side of a partition.
inline CampaignCase partition_case(MechanismKind kind, int n, std::uint64_t seed) {
  Lcg64 rng(seed);
  CampaignCase c;
  c.seed = seed;
  c.params = default_params(kind);
  c.config.n = n;
  c.config.seed = seed;
  c.config.min_delay = 1;
  c.config.max_delay = 1 + rng.uniform(0, 4);
  c.config.max_ticks = 50000;
  std::set<WriterId> left, right;
  for (WriterId i = 0; i < n; ++i) (i < n / 2 ? left : right).insert(i);
  c.config.fault_plan = FaultPlan({{0, Partition{{left, right}}}, {400, Heal{}}});
  c.workload = {{0, "k", "left", 1 + rng.uniform(0, 3), OpKind::Write},
                {n / 2, "k", "right", 1 + rng.uniform(0, 3), OpKind::Write}};
  c.scenario = "partition " + describe(c.config.fault_plan.events().front().action) + " heal@400";
  return c;
}

/// Builds the crash plan for one seed against a fault-free baseline.
inline CampaignCase crash_case(MechanismKind kind, int n, int f, std::uint64_t seed) {
  Lcg64 rng(seed);
  CampaignCase c;
  c.seed = seed;
  c.params = default_params(kind);
  c.config.n = n;
  c.config.seed = seed;
  c.config.min_delay = 1;
  c.config.max_delay = 1 + rng.uniform(0, 4);
  c.config.max_ticks = 50000;
  c.workload = campaign_workload(kind, n, rng);

  const auto phase = static_cast<CrashPhase>(seed % 3);
  c.scenario = to_string(phase);
  if (f <= 0) return c;

  auto baseline = run_mechanism(c.config, c.params, c.workload);
  Tick target = 1;
  WriterId first = static_cast<WriterId>(rng.uniform(0, n - 1));
  if (!baseline.passes.empty()) {
    const auto& p = baseline.passes[static_cast<std::size_t>(
        rng.uniform(0, static_cast<std::int64_t>(baseline.passes.size()) - 1))];
    first = p.driver;
    const Tick exe_start = p.pre_done_tick.value_or(p.start_tick);
    switch (phase) {
      case CrashPhase::AfterPre: target = exe_start + 1; break;
      case CrashPhase::MidExe:
        target = exe_start + rng.uniform(0, std::max<Tick>(0, p.end_tick - exe_start));
        break;
      case CrashPhase::Settled: target = p.end_tick + 1; break;
    }
  }

  std::vector<WriterId> victims = {first};
  while (static_cast<int>(victims.size()) < f) {
    auto v = static_cast<WriterId>(rng.uniform(0, n - 1));
    if (std::find(victims.begin(), victims.end(), v) == victims.end()) victims.push_back(v);
  }
  std::vector<FaultEvent> events;
  for (std::size_t i = 0; i < victims.size(); ++i) {
    Tick at = target + (i == 0 ? 0 : rng.uniform(0, 20));
    events.push_back({at, Crash{victims[i]}});
    if (rng.bernoulli(1, 2)) events.push_back({at + rng.uniform(50, 300), Recover{victims[i]}});
  }
  c.config.fault_plan = FaultPlan(events);
  for (const auto& e : c.config.fault_plan.events())
    c.scenario += " " + std::to_string(e.tick) + ":" + describe(e.action);
  return c;
}

inline CampaignRun run_campaign_case(MechanismKind kind, const CampaignCase& c) {
  CampaignRun out{c, RunStatus::Quiescent, Verdict::pass("progress"), Verdict::pass("safety")};
  auto r = run_mechanism(c.config, c.params, c.workload);
  out.status = r.status;
  std::set<WriterId> down;
  for (WriterId i = 0; i < c.config.n; ++i)
    if (!r.live.contains(i)) down.insert(i);
  out.progress = detect_progress(r.history, c.workload, r.end_tick, down);
  if (out.progress.passed() && r.status != RunStatus::Quiescent)
    out.progress = Verdict::fail("progress", "run ended " + to_string(r.status) + " at tick " + std::to_string(r.end_tick));

  auto regs = r.writer_registers(c.config.n);
  if (kind == MechanismKind::CrdtGCounter || kind == MechanismKind::CrdtOrSet) {
    std::vector<Register> live;
    for (const auto& reg : regs)
      if (r.live.contains(reg.replica_id())) live.push_back(reg);
    out.safety = check_sec(live, delivered_sets(live));
  } else {
    out.safety = detect_split_brain(regs, r.live);
  }
  return out;
}

/// Runs every seed (in parallel across `jobs` threads); the summary does not
/// depend on `jobs`.
inline CampaignSummary fault_campaign(MechanismKind kind, int n, int f, const std::vector<std::uint64_t>& seeds,
                                      unsigned jobs = 1) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  if (f < 0 || f > n - 1) throw std::invalid_argument("f must lie in [0, n-1]");
  std::vector<CampaignRun> results(seeds.size());
  auto one = [&](std::size_t i) {
    CampaignCase c = kind == MechanismKind::BrokenSubMajorityPaxos ? partition_case(kind, n, seeds[i])
                                                                   : crash_case(kind, n, f, seeds[i]);
    results[i] = run_campaign_case(kind, c);
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(seeds.size())));
  if (jobs == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) one(i);
      });
    for (auto& th : pool) th.join();
  }
  CampaignSummary s;
  s.runs = results.size();
  for (auto& r : results) {
    if (!r.progress.passed()) ++s.progress_failures;
    if (!r.safety.passed()) ++s.safety_failures;
    if (!r.progress.passed() || !r.safety.passed()) s.failed.push_back(std::move(r));
  }
  return s;
}

inline std::vector<std::uint64_t> seed_range(std::size_t count, std::uint64_t first = 1) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(first + i);
  return out;
}

}  // namespace syncframe
