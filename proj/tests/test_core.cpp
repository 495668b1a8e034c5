#include <gtest/gtest.h>

#include "syncframe/core_model.hpp"
#include "syncframe/harness.hpp"
#include "syncframe/rng.hpp"
#include "syncframe/simnet.hpp"

using namespace syncframe;

namespace {

WriteOp w(WriterId writer, std::uint64_t seq, const std::string& value, const std::string& key = "k") {
  return make_write(writer, seq, key, value);
}

Projection project_values(const std::vector<std::string>& values, ProjectionKind kind) {
  std::vector<WriteOp> series;
  for (std::size_t i = 0; i < values.size(); ++i) series.push_back(w(0, i, values[i]));
  return project_series(series, kind);
}

PassTrace pass_of(std::vector<WriteOp> converged) {
  PassTrace p;
  p.path = {Stage::Exe};
  p.rtts_per_stage[Stage::Exe] = RoundTrips::whole(1);
  p.converged = std::move(converged);
  return p;
}

struct Text {
  std::string s;
  std::string summary() const { return s; }
};

}  // namespace

// --- rng -------------------------------------------------------------------

TEST(Rng, MatchesIndependentlyComputedVectors) {
  // state' = state * 6364136223846793005 + 1442695040888963407 (mod 2^64),
  // output = high 32 bits; values computed offline with arbitrary precision.
  Lcg64 rng(1);
  EXPECT_EQ(rng.next32(), 0x6C576FACu);
  EXPECT_EQ(rng.next32(), 0x826886B3u);
  EXPECT_EQ(rng.next32(), 0xA5FAE199u);
  EXPECT_EQ(rng.next32(), 0x620355CDu);
  EXPECT_EQ(rng.next32(), 0xCBA276B4u);
}

TEST(Rng, UniformStaysInBounds) {
  Lcg64 rng(42);
  for (int i = 0; i < 10000; ++i) {
    auto v = rng.uniform(3, 7);
    ASSERT_GE(v, 3);
    ASSERT_LE(v, 7);
  }
  EXPECT_EQ(rng.uniform(5, 5), 5);
}

TEST(Rng, BernoulliExtremes) {
  Lcg64 rng(9);
  for (int i = 0; i < 100; ++i) {
    EXPECT_FALSE(rng.bernoulli(0, 1));
    EXPECT_TRUE(rng.bernoulli(1, 1));
  }
}

TEST(Digest, Fnv1aReferenceValues) {
  Fnv1a64 empty;
  EXPECT_EQ(empty.value(), 0xcbf29ce484222325ULL);
  Fnv1a64 a;
  a.update("a");
  EXPECT_EQ(a.value(), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex_digest(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
}

// --- writes and projections -------------------------------------------------

TEST(WriteOp, PhiWriteNeedsMetadata) {
  EXPECT_THROW(make_meta_write(0, 0, Metadata{}), std::invalid_argument);
  Metadata m;
  m.ballot = 3;
  auto phi = make_meta_write(0, 0, m);
  EXPECT_TRUE(phi.value.is_phi());
  EXPECT_EQ(phi.value.to_string(), "φ");
}

TEST(WriteOp, PhiDiffersFromEmptyString) {
  EXPECT_NE(Value::phi(), Value::of(""));
  EXPECT_THROW((void)Value::phi().bytes(), std::logic_error);
}

TEST(Projection, SumOfSingleValue) { EXPECT_EQ(project_values({"5"}, ProjectionKind::Sum).to_string(), "5"); }

TEST(Projection, SumOfSeries) { EXPECT_EQ(project_values({"1", "2", "3"}, ProjectionKind::Sum).to_string(), "6"); }

TEST(Projection, LastWriteTakesFinalElement) {
  EXPECT_EQ(project_values({"7", "9"}, ProjectionKind::LastWrite).to_string(), "9");
}

TEST(Projection, EmptyLastWriteIsDistinguished) {
  auto p = project_values({}, ProjectionKind::LastWrite);
  EXPECT_TRUE(p.is_empty());
  EXPECT_EQ(p.to_string(), "<empty>");
}

TEST(Projection, SetUnionAndLogSequence) {
  EXPECT_EQ(project_values({"b", "a", "b"}, ProjectionKind::SetUnion).to_string(), "{a,b}");
  EXPECT_EQ(project_values({"b", "a", "b"}, ProjectionKind::LogSequence).to_string(), "[b,a,b]");
}

TEST(Projection, PhiWritesDoNotContributeValues) {
  Metadata m;
  m.ballot = 1;
  std::vector<WriteOp> s = {w(0, 0, "4"), make_meta_write(1, 0, m), w(2, 0, "6")};
  EXPECT_EQ(project_series(s, ProjectionKind::Sum).to_string(), "10");
  EXPECT_EQ(project_series(s, ProjectionKind::LastWrite).to_string(), "6");
  EXPECT_EQ(project_series(s, ProjectionKind::LogSequence).to_string(), "[4,6]");
}

TEST(Projection, SumRejectsNonIntegers) {
  EXPECT_THROW(project_values({"x"}, ProjectionKind::Sum), ProjectionError);
}

TEST(Projection, SetUnionRemoveTakesObservedTagsOnly) {
  Metadata rm;
  rm.deps = std::set<OpId>{{0, 0}};
  rm.logical_time = 1;
  std::vector<WriteOp> s = {w(0, 0, "x"), w(1, 0, "x"), make_meta_write(2, 0, rm, "k")};
  // The add tagged 1.0 was not observed by the remove and survives.
  EXPECT_EQ(project_series(s, ProjectionKind::SetUnion).to_string(), "{x}");
  rm.deps = std::set<OpId>{{0, 0}, {1, 0}};
  s.back() = make_meta_write(2, 0, rm, "k");
  EXPECT_EQ(project_series(s, ProjectionKind::SetUnion).to_string(), "{}");
}

TEST(ProjectionKind, RoundTripsThroughStrings) {
  for (auto k : {ProjectionKind::LastWrite, ProjectionKind::Sum, ProjectionKind::SetUnion, ProjectionKind::LogSequence})
    EXPECT_EQ(projection_from_string(to_string(k)), k);
  EXPECT_FALSE(projection_from_string("median").has_value());
}

// --- register ---------------------------------------------------------------

TEST(Register, AppendsInOrder) {
  Register r(0, ProjectionKind::LogSequence);
  auto r1 = append_committed(r, w(0, 0, "a"));
  ASSERT_EQ(r1.size(), 1u);
  auto r2 = append_committed(r1, w(1, 0, "b"));
  ASSERT_EQ(r2.size(), 2u);
  EXPECT_EQ(r2.series()[0].id(), (OpId{0, 0}));
  EXPECT_EQ(r2.series()[1].id(), (OpId{1, 0}));
  EXPECT_EQ(r.size(), 0u);
}

TEST(Register, DuplicateCommitRejected) {
  Register r(0, ProjectionKind::LastWrite);
  r.append_committed(w(0, 0, "a"));
  EXPECT_THROW(r.append_committed(w(0, 0, "a")), DuplicateCommit);
}

TEST(Register, PerKeyProjection) {
  Register r(0, ProjectionKind::LastWrite);
  r.append_committed(w(0, 0, "1", "x"));
  r.append_committed(w(0, 1, "2", "y"));
  r.append_committed(w(0, 2, "3", "x"));
  EXPECT_EQ(r.project("x").to_string(), "3");
  EXPECT_EQ(r.project("y").to_string(), "2");
  EXPECT_EQ(r.project("z").to_string(), "<empty>");
  EXPECT_EQ(r.keys(), (std::set<std::string>{"x", "y"}));
}

TEST(RegisterProperty, SnapshotsArePrefixRelated) {
  Lcg64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Register r(0, ProjectionKind::LogSequence);
    std::vector<std::vector<WriteOp>> snaps;
    const int len = static_cast<int>(rng.uniform(1, 20));
    for (int i = 0; i < len; ++i) {
      r.append_committed(w(static_cast<WriterId>(rng.uniform(0, 4)), static_cast<std::uint64_t>(i), std::to_string(i)));
      snaps.push_back(r.series());
    }
    for (std::size_t a = 0; a + 1 < snaps.size(); ++a)
      ASSERT_TRUE(std::equal(snaps[a].begin(), snaps[a].end(), snaps[a + 1].begin()));
  }
}

// --- quorums, round trips, passes -------------------------------------------

TEST(Quorum, MembersMustLieInRange) {
  EXPECT_NO_THROW(make_quorum(5, {0, 1, 2}, Stage::Exe));
  EXPECT_THROW(make_quorum(5, {0, 5}, Stage::Exe), std::invalid_argument);
  EXPECT_THROW(make_quorum(5, {}, Stage::Exe), std::invalid_argument);
}

TEST(RoundTrips, HalvesArithmeticAndParsing) {
  EXPECT_EQ(RoundTrips::half().to_string(), "0.5");
  EXPECT_EQ(RoundTrips::from_halves(3).to_string(), "1.5");
  EXPECT_EQ((RoundTrips::whole(1) + RoundTrips::whole(1)).to_string(), "2");
  EXPECT_EQ(RoundTrips::parse("1.5"), RoundTrips::from_halves(3));
  EXPECT_FALSE(RoundTrips::parse("1.25").has_value());
  EXPECT_FALSE(RoundTrips::parse("abc").has_value());
}

TEST(PassTrace, ValidPathsAreTheThreeWalks) {
  using enum Stage;
  EXPECT_TRUE(valid_path({Pre}));
  EXPECT_TRUE(valid_path({Pre, Exe}));
  EXPECT_TRUE(valid_path({Exe}));
  EXPECT_FALSE(valid_path({Exe, Pre}));
  EXPECT_FALSE(valid_path({}));
  EXPECT_FALSE(valid_path({Pre, Pre}));
}

TEST(PassTrace, ValidationRejectsBrokenPasses) {
  auto p = pass_of({w(0, 0, "a")});
  EXPECT_NO_THROW(validate_pass(p));
  auto empty = pass_of({});
  EXPECT_THROW(validate_pass(empty), std::invalid_argument);
  auto both = pass_of({w(0, 0, "a")});
  both.aborted = {w(0, 0, "a")};
  EXPECT_THROW(validate_pass(both), std::invalid_argument);
  auto off_path = pass_of({w(0, 0, "a")});
  off_path.rtts_per_stage[Stage::Pre] = RoundTrips::whole(1);
  EXPECT_THROW(validate_pass(off_path), std::invalid_argument);
}

// --- consistency classification ----------------------------------------------

TEST(Classify, AllSingletonsAreLinearizable) {
  std::vector<PassTrace> t = {pass_of({w(0, 0, "a")}), pass_of({w(1, 0, "b")}), pass_of({w(2, 0, "c")})};
  EXPECT_EQ(classify_consistency(t, true), Consistency::Linearizable);
}

TEST(Classify, LargerSetsWithPerWriterOrderAreSequential) {
  std::vector<PassTrace> t = {pass_of({w(0, 0, "a"), w(1, 0, "b"), w(2, 0, "c")}),
                              pass_of({w(0, 1, "d"), w(1, 1, "e")})};
  EXPECT_EQ(classify_consistency(t, true), Consistency::Sequential);
}

TEST(Classify, CoResidentSameWriterIsEventual) {
  std::vector<WriteOp> four = {w(0, 0, "a"), w(0, 1, "b"), w(1, 0, "c"), w(2, 0, "d")};
  std::vector<WriteOp> seven;
  for (int i = 0; i < 7; ++i) seven.push_back(w(i % 3, 10 + static_cast<std::uint64_t>(i), "x"));
  EXPECT_EQ(classify_consistency({pass_of(four), pass_of(seven)}, true), Consistency::Eventual);
}

TEST(Classify, EmptyTraceListIsInsufficient) {
  EXPECT_THROW(classify_consistency({}, true), InsufficientData);
}

// --- history ----------------------------------------------------------------

TEST(History, RespondNeedsInvoke) {
  History h;
  EXPECT_THROW(h.respond(1, 0, 7, OpResult{}), HistoryError);
  h.invoke(1, 0, ClientOp{7, 0, OpKind::Write, "k", "v"});
  EXPECT_NO_THROW(h.respond(2, 0, 7, OpResult{}));
  EXPECT_THROW(h.respond(3, 0, 7, OpResult{}), HistoryError);
}

TEST(History, TimeIsNonDecreasing) {
  History h;
  h.invoke(5, 0, ClientOp{1, 0, OpKind::Write, "k", "v"});
  EXPECT_THROW(h.invoke(4, 0, ClientOp{2, 0, OpKind::Write, "k", "v"}), HistoryError);
}

// --- simnet -----------------------------------------------------------------

TEST(Simnet, FixedDelayDeliversNextTick) {
  SimConfig cfg;
  cfg.n = 2;
  Network<Text> net(cfg, 2);
  net.set_timer(0, 5, 0);
  auto s = net.step();
  ASSERT_EQ(s.tick, 5);
  EXPECT_EQ(net.send(0, 1, {"hello"}), SendResult::Queued);
  auto d = net.step();
  ASSERT_EQ(d.status, StepStatus::Advanced);
  EXPECT_EQ(d.tick, 6);
  ASSERT_EQ(d.delivered().size(), 1u);
  EXPECT_EQ(d.delivered()[0].payload.s, "hello");
}

TEST(Simnet, CertainDropNeverDelivers) {
  SimConfig cfg;
  cfg.n = 2;
  cfg.drop_num = cfg.drop_den = 1;
  Network<Text> net(cfg, 2);
  EXPECT_EQ(net.send(0, 1, {"x"}), SendResult::Dropped);
  EXPECT_EQ(net.step().status, StepStatus::Exhausted);
  EXPECT_NE(net.trace().lines().back().find("|DROP|"), std::string::npos);
}

TEST(Simnet, PartitionBlocksCrossGroupTraffic) {
  SimConfig cfg;
  cfg.n = 3;
  cfg.fault_plan = FaultPlan({{0, Partition{{{0, 1}, {2}}}}});
  Network<Text> net(cfg, 3);
  net.set_timer(0, 1, 0);
  net.step();
  EXPECT_EQ(net.send(0, 2, {"x"}), SendResult::Partitioned);
  EXPECT_EQ(net.send(0, 1, {"y"}), SendResult::Queued);
}

TEST(Simnet, EqualTickDeliveriesOrderedBySource) {
  SimConfig cfg;
  cfg.n = 4;
  cfg.min_delay = cfg.max_delay = 9;
  Network<Text> net(cfg, 4);
  net.send(2, 1, {"from2"});
  net.send(0, 1, {"from0"});
  auto s = net.step();
  ASSERT_EQ(s.tick, 9);
  auto d = s.delivered();
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].src, 0);
  EXPECT_EQ(d[1].src, 2);
}

TEST(Simnet, FaultsApplyBeforeDeliveries) {
  SimConfig cfg;
  cfg.n = 4;
  cfg.min_delay = cfg.max_delay = 9;
  cfg.fault_plan = FaultPlan({{9, Crash{3}}});
  Network<Text> net(cfg, 4);
  net.send(0, 3, {"late"});
  auto s = net.step();
  EXPECT_EQ(s.tick, 9);
  ASSERT_EQ(s.faults.size(), 1u);
  EXPECT_TRUE(s.delivered().empty());
  EXPECT_FALSE(net.is_live(3));
}

TEST(Simnet, CrashedSenderIsRecordedNotSent) {
  SimConfig cfg;
  cfg.n = 2;
  cfg.fault_plan = FaultPlan({{1, Crash{0}}});
  Network<Text> net(cfg, 2);
  net.set_timer(1, 2, 0);
  net.step();
  EXPECT_EQ(net.send(0, 1, {"x"}), SendResult::SenderDown);
}

TEST(Simnet, TimeoutDistinctFromExhaustion) {
  SimConfig cfg;
  cfg.n = 1;
  cfg.max_ticks = 10;
  Network<Text> net(cfg, 1);
  EXPECT_EQ(net.step().status, StepStatus::Exhausted);
  net.set_timer(0, 50, 0);
  EXPECT_EQ(net.step().status, StepStatus::Timeout);
}

TEST(FaultPlanValidation, RejectsDoubleCrashAndLiveRecover) {
  SimConfig cfg;
  cfg.n = 3;
  cfg.fault_plan = FaultPlan({{1, Crash{1}}, {2, Crash{1}}});
  EXPECT_THROW(cfg.validate(), InvalidFaultPlan);
  cfg.fault_plan = FaultPlan({{1, Recover{2}}});
  EXPECT_THROW(cfg.validate(), InvalidFaultPlan);
  cfg.fault_plan = FaultPlan({{1, Crash{5}}});
  EXPECT_THROW(cfg.validate(), InvalidFaultPlan);
}

TEST(FaultPlanValidation, PartitionGroupsMustBeDisjointAndCovering) {
  SimConfig cfg;
  cfg.n = 3;
  cfg.fault_plan = FaultPlan({{1, Partition{{{0, 1}, {1, 2}}}}});
  EXPECT_THROW(cfg.validate(), InvalidFaultPlan);
  cfg.fault_plan = FaultPlan({{1, Partition{{{0}, {1}}}}});
  EXPECT_THROW(cfg.validate(), InvalidFaultPlan);
  cfg.fault_plan = FaultPlan({{1, Partition{{{0}, {1, 2}}}}, {2, Heal{}}});
  EXPECT_NO_THROW(cfg.validate());
}

TEST(SimConfigValidation, RejectsBadBounds) {
  SimConfig cfg;
  cfg.min_delay = 3;
  cfg.max_delay = 2;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = SimConfig{};
  cfg.drop_num = 2;
  cfg.drop_den = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(SimnetProperty, IdenticalConfigGivesIdenticalTrace) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto run = [&] {
      SimConfig cfg;
      cfg.n = 4;
      cfg.seed = seed;
      cfg.min_delay = 1;
      cfg.max_delay = 6;
      cfg.drop_num = 1;
      cfg.drop_den = 5;
      Network<Text> net(cfg, 4);
      Lcg64 local(seed * 31);
      for (int i = 0; i < 40; ++i)
        net.send(static_cast<WriterId>(local.uniform(0, 3)), static_cast<WriterId>(local.uniform(0, 3)),
                 {"m" + std::to_string(i)});
      while (net.step().status == StepStatus::Advanced) {
      }
      return net.trace().digest();
    };
    ASSERT_EQ(run(), run());
  }
}

TEST(SimnetProperty, DeliveryWithinDelayBounds) {
  SimConfig cfg;
  cfg.n = 3;
  cfg.seed = 11;
  cfg.min_delay = 2;
  cfg.max_delay = 7;
  Network<Text> net(cfg, 3);
  for (int i = 0; i < 200; ++i) net.send(i % 3, (i + 1) % 3, {"x"});
  for (auto s = net.step(); s.status == StepStatus::Advanced; s = net.step())
    for (const auto& e : s.delivered()) {
      ASSERT_GE(e.deliver_tick - e.send_tick, 2);
      ASSERT_LE(e.deliver_tick - e.send_tick, 7);
    }
}
