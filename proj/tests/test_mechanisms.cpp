#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "syncframe/mechanisms.hpp"

using namespace syncframe;

namespace {

SimConfig config(int n, std::uint64_t seed, Tick min_delay = 1, Tick max_delay = 1) {
  SimConfig cfg;
  cfg.n = n;
  cfg.seed = seed;
  cfg.min_delay = min_delay;
  cfg.max_delay = max_delay;
  return cfg;
}

Workload random_workload(Lcg64& rng, int n, int ops, Tick horizon) {
  Workload w;
  for (int i = 0; i < ops; ++i)
    w.push_back({static_cast<WriterId>(rng.uniform(0, n - 1)), "k", std::to_string(i + 1),
                 rng.uniform(0, horizon), OpKind::Write});
  return w;
}

std::vector<std::string> values_of(const std::vector<WriteOp>& series) {
  std::vector<std::string> out;
  for (const auto& w : series)
    if (!w.value.is_phi()) out.push_back(w.value.bytes());
  return out;
}

bool is_prefix(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin());
}

std::size_t responses(const History& h) {
  return static_cast<std::size_t>(std::count_if(h.events().begin(), h.events().end(), [](const HistoryEvent& e) {
    return std::holds_alternative<Respond>(e.event);
  }));
}

const std::vector<MechanismKind> kLinearizable = {MechanismKind::Paxos, MechanismKind::Raft, MechanismKind::VR,
                                                  MechanismKind::EPaxos, MechanismKind::EPaxosPriority,
                                                  MechanismKind::AtomicCas};

}  // namespace

// --- static tables ----------------------------------------------------------

TEST(QuorumSize, PaxosStages) {
  EXPECT_EQ(quorum_size(MechanismKind::Paxos, Stage::Pre, "-", 5), 5);
  EXPECT_EQ(quorum_size(MechanismKind::Paxos, Stage::Exe, "-", 5), 3);
  EXPECT_EQ(quorum_size(MechanismKind::Paxos, Stage::Exe, "-", 4), 3);
}

TEST(QuorumSize, EPaxosFastAndSlow) {
  EXPECT_EQ(quorum_size(MechanismKind::EPaxos, Stage::Exe, "fast", 4), 3);
  EXPECT_EQ(quorum_size(MechanismKind::EPaxos, Stage::Exe, "fast", 7), 5);
  EXPECT_EQ(quorum_size(MechanismKind::EPaxos, Stage::Exe, "fast", 7, FastQuorumRounding::Ceil), 6);
  EXPECT_EQ(quorum_size(MechanismKind::EPaxos, Stage::Exe, "slow", 5), 3);
}

TEST(QuorumSize, UnknownCellsThrow) {
  EXPECT_THROW(quorum_size(MechanismKind::Raft, Stage::Exe, "electing", 3), UnknownCase);
  EXPECT_THROW(quorum_size(MechanismKind::Paxos, Stage::Exe, "fast", 3), UnknownCase);
  EXPECT_THROW(quorum_size(MechanismKind::EPaxos, Stage::Pre, "fast", 3), UnknownCase);
}

TEST(MechanismNames, RoundTrip) {
  for (auto k : all_mechanisms()) EXPECT_EQ(mechanism_from_string(to_string(k)), k);
  EXPECT_FALSE(mechanism_from_string("zab").has_value());
}

TEST(PriorityTreeTest, RanksAncestorsFirst) {
  PriorityTree t(4, {{1, 0}, {2, 0}, {3, 1}});
  EXPECT_LT(t.rank(0), t.rank(1));
  EXPECT_LT(t.rank(1), t.rank(3));
  EXPECT_LT(t.rank(3), t.rank(2));
  EXPECT_TRUE(t.siblings(1, 2));
  EXPECT_FALSE(t.siblings(0, 3));
}

TEST(PriorityTreeTest, RejectsCyclesAndStrangers) {
  EXPECT_THROW(PriorityTree(3, {{0, 1}, {1, 0}}), InvalidPriorityTree);
  EXPECT_THROW(PriorityTree(3, {{0, 5}}), InvalidPriorityTree);
  EXPECT_THROW(PriorityTree(3, {{1, 1}}), InvalidPriorityTree);
}

// --- harness ----------------------------------------------------------------

TEST(Harness, PaxosSingleWriteCommitsEverywhere) {
  auto r = run_mechanism(config(3, 1), default_params(MechanismKind::Paxos), {{0, "k", "v", 0, OpKind::Write}});
  ASSERT_EQ(r.status, RunStatus::Quiescent);
  for (const auto& reg : r.writer_registers(3)) {
    ASSERT_EQ(values_of(reg.series()), std::vector<std::string>{"v"});
    EXPECT_EQ(reg.project().to_string(), "v");
  }
  EXPECT_TRUE(r.history.responded(0));
}

TEST(Harness, EmptyWorkloadQuiescesImmediately) {
  for (auto k : all_mechanisms()) {
    auto r = run_mechanism(config(3, 1), default_params(k), {});
    EXPECT_EQ(r.status, RunStatus::Quiescent) << to_string(k);
    EXPECT_TRUE(r.passes.empty()) << to_string(k);
  }
}

TEST(Harness, SameInputsSameDigest) {
  Lcg64 rng(5);
  auto w = random_workload(rng, 5, 8, 100);
  for (auto k : all_mechanisms()) {
    auto cfg = config(5, 77, 1, 6);
    cfg.drop_num = 1;
    cfg.drop_den = 10;
    auto a = run_mechanism(cfg, default_params(k), w);
    auto b = run_mechanism(cfg, default_params(k), w);
    EXPECT_EQ(a.digest, b.digest) << to_string(k);
    EXPECT_EQ(a.trace, b.trace) << to_string(k);
  }
}

TEST(Harness, EveryPassIsStructurallyValid) {
  Lcg64 rng(8);
  for (auto k : all_mechanisms()) {
    auto r = run_mechanism(config(5, 3, 1, 4), default_params(k), random_workload(rng, 5, 10, 150));
    for (const auto& p : r.passes) EXPECT_NO_THROW(validate_pass(p)) << to_string(k);
  }
}

// --- agreement properties ---------------------------------------------------

TEST(AgreementProperty, LinearizableMechanismsKeepPrefixRelatedLogs) {
  for (auto kind : kLinearizable) {
    for (std::uint64_t seed = 1; seed <= 15; ++seed) {
      Lcg64 rng(seed * 101);
      const int n = static_cast<int>(rng.uniform(3, 6));
      auto cfg = config(n, seed, 1, 5);
      cfg.drop_num = 1;
      cfg.drop_den = 20;
      auto w = random_workload(rng, n, 10, 200);
      auto r = run_mechanism(cfg, default_params(kind), w);
      ASSERT_EQ(r.status, RunStatus::Quiescent) << to_string(kind) << " seed " << seed;
      EXPECT_EQ(responses(r.history), w.size()) << to_string(kind) << " seed " << seed;
      auto regs = r.writer_registers(n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          auto va = values_of(regs[a].series()), vb = values_of(regs[b].series());
          ASSERT_TRUE(is_prefix(va, vb) || is_prefix(vb, va))
              << to_string(kind) << " seed " << seed << " replicas " << a << "," << b;
        }
    }
  }
}

TEST(AgreementProperty, AcknowledgedWritesAreCommittedSomewhere) {
  for (auto kind : kLinearizable) {
    Lcg64 rng(4242);
    auto w = random_workload(rng, 5, 12, 150);
    auto r = run_mechanism(config(5, 9, 1, 4), default_params(kind), w);
    std::set<RequestId> committed;
    for (const auto& reg : r.writer_registers(5))
      for (const auto& op : reg.series())
        if (op.origin) committed.insert(*op.origin);
    for (RequestId i = 0; i < w.size(); ++i) {
      if (!r.history.responded(i)) continue;
      EXPECT_TRUE(committed.contains(i)) << to_string(kind) << " request " << i;
    }
  }
}

TEST(AgreementProperty, SurvivesMinorityCrash) {
  for (auto kind : {MechanismKind::Paxos, MechanismKind::Raft, MechanismKind::VR, MechanismKind::EPaxos}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto cfg = config(5, seed, 1, 3);
      cfg.fault_plan = FaultPlan({{20, Crash{0}}, {25, Crash{1}}});
      Workload w = {{2, "k", "a", 0, OpKind::Write}, {3, "k", "b", 60, OpKind::Write}, {4, "k", "c", 120, OpKind::Write}};
      auto r = run_mechanism(cfg, default_params(kind), w);
      ASSERT_EQ(r.status, RunStatus::Quiescent) << to_string(kind);
      for (RequestId i = 0; i < w.size(); ++i) EXPECT_TRUE(r.history.responded(i)) << to_string(kind);
      auto v2 = values_of(r.registers[2].series());
      for (WriterId x : {3, 4}) EXPECT_EQ(values_of(r.registers[x].series()), v2) << to_string(kind);
    }
  }
}

// --- Paxos ------------------------------------------------------------------

TEST(Paxos, PassGoesThroughBothStages) {
  auto r = run_mechanism(config(5, 1), default_params(MechanismKind::Paxos), {{1, "k", "x", 0, OpKind::Write}});
  ASSERT_FALSE(r.passes.empty());
  const auto& p = r.passes.back();
  EXPECT_EQ(p.path, (std::vector<Stage>{Stage::Pre, Stage::Exe}));
  ASSERT_EQ(p.converged.size(), 1u);
  EXPECT_EQ(p.converged[0].value.bytes(), "x");
  EXPECT_EQ(p.total_rtts().to_string(), "2");
}

TEST(Paxos, ContendingWritersBothCommit) {
  Workload w = {{0, "k", "a", 0, OpKind::Write}, {4, "k", "b", 0, OpKind::Write}};
  auto r = run_mechanism(config(5, 3, 1, 2), default_params(MechanismKind::Paxos), w);
  ASSERT_EQ(r.status, RunStatus::Quiescent);
  auto v = values_of(r.registers[2].series());
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v, (std::vector<std::string>{"a", "b"}));
}

TEST(BrokenPaxos, DisjointHalvesDiverge) {
  auto cfg = config(4, 1);
  cfg.fault_plan = FaultPlan({{0, Partition{{{0, 1}, {2, 3}}}}, {400, Heal{}}});
  Workload w = {{0, "k", "left", 5, OpKind::Write}, {2, "k", "right", 5, OpKind::Write}};
  auto r = run_mechanism(cfg, default_params(MechanismKind::BrokenSubMajorityPaxos), w);
  EXPECT_EQ(r.registers[0].project().to_string(), "left");
  EXPECT_EQ(r.registers[2].project().to_string(), "right");
}

// --- Raft and VR ------------------------------------------------------------

TEST(Raft, FirstWriteElectsThenAppends) {
  Workload w = {{0, "k", "a", 0, OpKind::Write}, {0, "k", "b", 100, OpKind::Write}};
  auto r = run_mechanism(config(3, 1, 5, 5), default_params(MechanismKind::Raft), w);
  std::set<std::string> labels;
  for (const auto& p : r.passes) labels.insert(p.case_label);
  EXPECT_TRUE(labels.contains("electing"));
  EXPECT_TRUE(labels.contains("elected"));
  for (const auto& p : r.passes) EXPECT_EQ(p.converged.size(), 1u);
}

TEST(Raft, LeaderCrashTriggersNewTerm) {
  auto cfg = config(5, 2, 1, 3);
  cfg.fault_plan = FaultPlan({{80, Crash{0}}});
  Workload w = {{0, "k", "a", 0, OpKind::Write}, {3, "k", "b", 150, OpKind::Write}};
  auto r = run_mechanism(cfg, default_params(MechanismKind::Raft), w);
  ASSERT_EQ(r.status, RunStatus::Quiescent);
  EXPECT_TRUE(r.history.responded(1));
  std::set<std::uint64_t> epochs;
  for (const auto& p : r.passes) epochs.insert(p.epoch);
  EXPECT_GE(epochs.size(), 2u);
  EXPECT_EQ(values_of(r.registers[3].series()), (std::vector<std::string>{"a", "b"}));
}

TEST(VR, ViewChangeAfterPrimaryCrash) {
  auto cfg = config(5, 4, 5, 5);
  cfg.fault_plan = FaultPlan({{100, Crash{0}}});
  Workload w = {{1, "k", "a", 0, OpKind::Write}, {2, "k", "b", 160, OpKind::Write}};
  auto r = run_mechanism(cfg, default_params(MechanismKind::VR), w);
  ASSERT_EQ(r.status, RunStatus::Quiescent);
  std::map<std::string, RoundTrips> by_case;
  for (const auto& p : r.passes) by_case[p.case_label] = p.total_rtts();
  ASSERT_TRUE(by_case.contains("normal"));
  ASSERT_TRUE(by_case.contains("changing"));
  EXPECT_EQ(by_case["normal"].to_string(), "1");
  EXPECT_EQ(by_case["changing"].to_string(), "1.5");
  EXPECT_EQ(values_of(r.registers[4].series()), (std::vector<std::string>{"a", "b"}));
}

// --- EPaxos -----------------------------------------------------------------

TEST(EPaxos, IndependentWriteTakesFastPath) {
  auto r = run_mechanism(config(5, 1, 5, 5), default_params(MechanismKind::EPaxos), {{2, "k", "x", 0, OpKind::Write}});
  ASSERT_EQ(r.passes.size(), 1u);
  EXPECT_EQ(r.passes[0].case_label, "fast");
  EXPECT_EQ(r.passes[0].total_rtts().to_string(), "1");
  EXPECT_EQ(r.passes[0].quorums.back().size(), 3u);
}

TEST(EPaxos, RacingWritesCanNeedSlowPath) {
  Workload w = {{0, "k", "a", 0, OpKind::Write}, {1, "k", "b", 0, OpKind::Write}};
  auto r = run_mechanism(config(5, 1, 5, 5), default_params(MechanismKind::EPaxos), w);
  std::set<std::string> labels;
  for (const auto& p : r.passes) labels.insert(p.case_label);
  EXPECT_TRUE(labels.contains("slow"));
  auto v0 = values_of(r.registers[0].series());
  for (WriterId x = 1; x < 5; ++x) EXPECT_EQ(values_of(r.registers[x].series()), v0);
}

TEST(EPaxos, DifferentKeysDoNotConflict) {
  Workload w = {{0, "x", "a", 0, OpKind::Write}, {1, "y", "b", 0, OpKind::Write}};
  auto r = run_mechanism(config(5, 1, 5, 5), default_params(MechanismKind::EPaxos), w);
  for (const auto& p : r.passes) EXPECT_EQ(p.case_label, "fast");
}

TEST(EPaxosPriority, ConflictsResolveLocallyInOneRoundTrip) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Workload w;
    for (WriterId i = 0; i < 5; ++i) w.push_back({i, "k", "v" + std::to_string(i), 0, OpKind::Write});
    auto r = run_mechanism(config(5, seed, 5, 5), default_params(MechanismKind::EPaxosPriority), w);
    ASSERT_EQ(r.status, RunStatus::Quiescent);
    for (const auto& p : r.passes) EXPECT_EQ(p.total_rtts().to_string(), "1") << "seed " << seed;
    auto v0 = values_of(r.registers[0].series());
    EXPECT_EQ(v0.size(), 5u);
    for (WriterId x = 1; x < 5; ++x) EXPECT_EQ(values_of(r.registers[x].series()), v0) << "seed " << seed;
  }
}

// --- CRDT -------------------------------------------------------------------

TEST(GCounterMerge, LawsHoldOnRandomStates) {
  Lcg64 rng(3);
  auto random_counter = [&] {
    crdt::GCounter c;
    for (int i = 0; i < 6; ++i) c.increment(static_cast<WriterId>(rng.uniform(0, 3)), static_cast<std::uint64_t>(rng.uniform(0, 9)));
    return c;
  };
  for (int i = 0; i < 200; ++i) {
    auto a = random_counter(), b = random_counter(), c = random_counter();
    ASSERT_EQ(a.merge(b), b.merge(a));
    ASSERT_EQ(a.merge(b).merge(c), a.merge(b.merge(c)));
    ASSERT_EQ(a.merge(a), a);
  }
}

TEST(ORSetMerge, ConcurrentAddSurvivesRemove) {
  crdt::ORSet r1, r2;
  r1.add("x", {0, 0});
  r2 = r2.merge(r1);
  r2.remove_tags(r2.observed("x"));
  r1.add("x", {1, 0});
  auto m = r1.merge(r2);
  EXPECT_TRUE(m.contains("x"));
  EXPECT_EQ(m.observed("x"), (std::set<OpId>{{1, 0}}));
  EXPECT_EQ(m, r2.merge(r1));
}

TEST(ORSetMerge, EveryDeliveryOrderConverges) {
  // Brute force: apply a fixed set of operations in every permutation.
  struct Op {
    bool add;
    std::string element;
    OpId tag;
    std::set<OpId> removes;
  };
  std::vector<Op> ops = {{true, "x", {0, 0}, {}},
                         {true, "y", {1, 0}, {}},
                         {false, "x", {2, 0}, {{0, 0}}},
                         {true, "x", {3, 0}, {}},
                         {false, "y", {4, 0}, {{1, 0}}}};
  std::vector<int> order(ops.size());
  std::iota(order.begin(), order.end(), 0);
  std::optional<std::set<std::string>> expected;
  do {
    crdt::ORSet s;
    for (int i : order) {
      if (ops[i].add) s.add(ops[i].element, ops[i].tag);
      else s.remove_tags(ops[i].removes);
    }
    if (!expected) expected = s.elements();
    ASSERT_EQ(s.elements(), *expected);
  } while (std::next_permutation(order.begin(), order.end()));
  EXPECT_EQ(*expected, (std::set<std::string>{"x"}));
}

TEST(CrdtGCounter, ReplicasAgreeOnSum) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Lcg64 rng(seed);
    Workload w;
    std::int64_t total = 0;
    for (int i = 0; i < 12; ++i) {
      auto v = rng.uniform(1, 9);
      total += v;
      w.push_back({static_cast<WriterId>(rng.uniform(0, 3)), "k", std::to_string(v), rng.uniform(0, 50), OpKind::Write});
    }
    auto r = run_mechanism(config(4, seed, 1, 6), default_params(MechanismKind::CrdtGCounter), w);
    ASSERT_EQ(r.status, RunStatus::Quiescent);
    for (const auto& reg : r.writer_registers(4)) EXPECT_EQ(reg.project().to_string(), std::to_string(total));
  }
}

TEST(CrdtGCounter, LocalWriteRespondsWithoutWaiting) {
  auto r = run_mechanism(config(3, 1, 5, 5), default_params(MechanismKind::CrdtGCounter), {{1, "k", "2", 0, OpKind::Write}});
  bool found = false;
  for (const auto& e : r.history.events())
    if (std::holds_alternative<Respond>(e.event)) {
      EXPECT_LE(e.time, 1);
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(CrdtOrSet, RemoveOnlyAffectsObservedAdds) {
  Workload w = {{0, "k", "x", 0, OpKind::Write},
                {1, "k", "x", 40, OpKind::Remove},
                {2, "k", "y", 41, OpKind::Write}};
  auto r = run_mechanism(config(3, 1, 5, 5), default_params(MechanismKind::CrdtOrSet), w);
  for (const auto& reg : r.writer_registers(3)) EXPECT_EQ(reg.project().to_string(), "{y}");
}

// --- atomic CAS -------------------------------------------------------------

TEST(AtomicCas, AllWritersCommitInOneTotalOrder) {
  Workload w;
  for (WriterId i = 0; i < 4; ++i) w.push_back({i, "k", std::to_string(i), 0, OpKind::Write});
  auto r = run_mechanism(config(4, 6, 1, 3), default_params(MechanismKind::AtomicCas), w);
  ASSERT_EQ(r.status, RunStatus::Quiescent);
  auto v0 = values_of(r.registers[0].series());
  EXPECT_EQ(v0.size(), 4u);
  for (WriterId x = 1; x < 4; ++x) EXPECT_EQ(values_of(r.registers[x].series()), v0);
  for (const auto& p : r.passes) {
    EXPECT_EQ(p.converged.size(), 1u);
    EXPECT_EQ(p.total_rtts().to_string(), "1");
  }
}

TEST(AtomicCas, ReadsReturnLatestCommittedValue) {
  Workload w = {{0, "k", "a", 0, OpKind::Write}, {1, "k", "", 100, OpKind::Read}};
  auto r = run_mechanism(config(3, 1, 2, 2), default_params(MechanismKind::AtomicCas), w);
  std::optional<std::string> read;
  for (const auto& e : r.history.events())
    if (auto* resp = std::get_if<Respond>(&e.event); resp && resp->id == 1) read = resp->result.read_value;
  EXPECT_EQ(read, "a");
}
