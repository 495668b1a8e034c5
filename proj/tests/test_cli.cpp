#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "syncframe/cli.hpp"

using namespace syncframe;
namespace fs = std::filesystem;

namespace {

const char* kPaxos = R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},
  "sim":{"n":3,"seed":4,"min_delay":1,"max_delay":3},
  "workload":[{"writer":0,"value":"a","tick":0},{"writer":2,"value":"b","tick":1},{"writer":1,"op":"read","tick":90}]})";

std::string config_error(const std::string& text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("syncframe-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& out_file) {
  std::string cmd = std::string(SYNCFRAME_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// --- config parsing ---------------------------------------------------------------

TEST(Config, ParsesFullDocument) {
  auto c = parse_run_config(R"({"schema":"syncframe.run/1",
    "mechanism":{"kind":"epaxos-priority","priority_tree":{"1":0},"fast_quorum":"ceil"},
    "sim":{"n":3,"seed":9,"min_delay":2,"max_delay":5,"drop_prob":[1,10],"max_ticks":5000,
           "fault_plan":[{"tick":10,"crash":1},{"tick":20,"recover":1},{"tick":30,"partition":[[0],[1,2]]},{"tick":40,"heal":true}]},
    "workload":[{"writer":2,"key":"x","value":"v","tick":3},{"writer":0,"op":"read","key":"x","tick":50}],
    "checkers":["linearizable","progress"],"output_dir":"out"})");
  EXPECT_EQ(c.mechanism.kind, MechanismKind::EPaxosPriority);
  EXPECT_EQ(c.mechanism.fast_quorum, FastQuorumRounding::Ceil);
  ASSERT_TRUE(c.mechanism.priority.has_value());
  EXPECT_EQ(c.mechanism.priority->parent_of(1), 0);
  EXPECT_EQ(c.sim.drop_num, 1u);
  EXPECT_EQ(c.sim.fault_plan.events().size(), 4u);
  EXPECT_EQ(c.workload[1].kind, OpKind::Read);
  EXPECT_EQ(c.checkers.size(), 2u);
  EXPECT_EQ(c.output_dir, "out");
}

TEST(Config, CanonicalFormRoundTrips) {
  auto c = parse_run_config(kPaxos);
  auto again = parse_run_config(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
  EXPECT_EQ(again.workload, c.workload);
}

TEST(Config, WriterOutOfRangeNamesField) {
  auto e = config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},"sim":{"n":3},
    "workload":[{"writer":3,"value":"a"}]})");
  EXPECT_EQ(e, "field workload[0].writer: writer id 3 is not below n=3");
}

TEST(Config, UnknownFieldsRejected) {
  EXPECT_EQ(config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos","speed":2},"sim":{"n":3}})"),
            "field mechanism.speed: unknown field");
  EXPECT_EQ(config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"zab"},"sim":{"n":3}})"),
            "field mechanism.kind: unknown mechanism 'zab'");
}

TEST(Config, SyntaxErrorsCarryPosition) {
  auto e = config_error("{\n  \"schema\": ,\n}");
  EXPECT_NE(e.find("line 2"), std::string::npos) << e;
}

TEST(Config, SemanticErrors) {
  EXPECT_NE(config_error(R"({"schema":"syncframe.run/2","mechanism":{"kind":"paxos"},"sim":{"n":3}})"), "");
  EXPECT_NE(config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},"sim":{"n":0}})"), "");
  EXPECT_NE(config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},"sim":{"n":3,"min_delay":4,"max_delay":2}})"), "");
  EXPECT_NE(config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},"sim":{"n":3,"drop_prob":[3,2]}})"), "");
  EXPECT_NE(config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},"sim":{"n":3,"fault_plan":[{"tick":1,"crash":0},{"tick":2,"crash":0}]}})"), "");
  EXPECT_NE(config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},"sim":{"n":3,"fault_plan":[{"tick":1,"crash":0,"heal":true}]}})"), "");
  EXPECT_NE(config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos","priority_tree":{"0":1,"1":0}},"sim":{"n":3}})"), "");
  EXPECT_NE(config_error(R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},"sim":{"n":3},"checkers":["fast"]})"), "");
}

TEST(Config, ShippedSamplesParse) {
  for (const auto& entry : fs::directory_iterator(SYNCFRAME_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(parse_run_config(slurp(entry.path()))) << entry.path();
  }
}

// --- simulate ----------------------------------------------------------------------

TEST(Simulate, ValidPaxosPassesAndWritesArtifacts) {
  TempDir dir;
  auto cfg = dir.write("run.json", kPaxos);
  std::stringstream out, err;
  EXPECT_EQ(cmd_simulate(cfg.string(), out, err), kExitPass) << err.str();
  auto outdir = dir.path() / "syncframe-out";
  for (const char* f : {"trace.log", "history.log", "passes.log", "digest.txt", "verdicts.txt"})
    EXPECT_TRUE(fs::exists(outdir / f)) << f;
  auto digest = slurp(outdir / "digest.txt");
  EXPECT_EQ(digest.size(), 17u);
  EXPECT_NE(out.str().find("digest " + digest.substr(0, 16)), std::string::npos);
}

TEST(Simulate, SubMajorityConfigReportsSplitBrain) {
  TempDir dir;
  auto cfg = dir.write("broken.json", slurp(fs::path(SYNCFRAME_CONFIG_DIR) / "broken-split-brain.json"));
  std::stringstream out, err;
  EXPECT_EQ(cmd_simulate(cfg.string(), out, err), kExitCheckerFailure);
  EXPECT_NE(out.str().find("FAIL split-brain key k position 0"), std::string::npos) << out.str();
}

TEST(Simulate, BadConfigExitsTwo) {
  TempDir dir;
  auto cfg = dir.write("bad.json", R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},"sim":{"n":3},
    "workload":[{"writer":7,"value":"a"}]})");
  std::stringstream out, err;
  EXPECT_EQ(cmd_simulate(cfg.string(), out, err), kExitConfigError);
  EXPECT_NE(err.str().find("workload[0].writer"), std::string::npos);
  EXPECT_EQ(cmd_simulate((dir.path() / "missing.json").string(), out, err), kExitConfigError);
}

TEST(Simulate, MajorityLossTimesOut) {
  TempDir dir;
  auto cfg = dir.write("stuck.json", R"({"schema":"syncframe.run/1","mechanism":{"kind":"paxos"},
    "sim":{"n":3,"max_ticks":3000,"fault_plan":[{"tick":0,"crash":1},{"tick":0,"crash":2}]},
    "workload":[{"writer":0,"value":"a","tick":1}]})");
  std::stringstream out, err;
  EXPECT_EQ(cmd_simulate(cfg.string(), out, err), kExitLivenessTimeout) << out.str();
}

TEST(Simulate, SeedOverrideFromEnvironment) {
  TempDir dir;
  auto cfg = dir.write("run.json", kPaxos);
  std::stringstream out1, out2, err;
  ::setenv("SYNCFRAME_SEED", "4", 1);
  cmd_simulate(cfg.string(), out1, err);
  ::setenv("SYNCFRAME_SEED", "99", 1);
  cmd_simulate(cfg.string(), out2, err);
  ::unsetenv("SYNCFRAME_SEED");
  EXPECT_NE(out1.str(), out2.str());
  EXPECT_NE(slurp(dir.path() / "syncframe-out" / "trace.log").find("\"seed\":99"), std::string::npos);
}

// --- replay ------------------------------------------------------------------------

TEST(Replay, FreshTraceIsIdentical) {
  TempDir dir;
  std::stringstream out, err;
  cmd_simulate(dir.write("run.json", kPaxos).string(), out, err);
  std::stringstream rout, rerr;
  EXPECT_EQ(cmd_replay((dir.path() / "syncframe-out" / "trace.log").string(), rout, rerr), kExitPass) << rerr.str();
}

TEST(Replay, EditedRecordDiverges) {
  TempDir dir;
  std::stringstream out, err;
  cmd_simulate(dir.write("run.json", kPaxos).string(), out, err);
  auto trace = dir.path() / "syncframe-out" / "trace.log";
  auto text = slurp(trace);
  auto pos = text.find("|SEND|");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 6, "|DROP|");
  std::ofstream(trace) << text;
  std::stringstream rout, rerr;
  EXPECT_EQ(cmd_replay(trace.string(), rout, rerr), kExitReplayDivergence);
  EXPECT_NE(rerr.str().find("divergence at record"), std::string::npos);
}

TEST(Replay, TruncatedTraceIsConfigError) {
  TempDir dir;
  std::stringstream out, err;
  cmd_simulate(dir.write("run.json", kPaxos).string(), out, err);
  auto trace = dir.path() / "syncframe-out" / "trace.log";
  auto text = slurp(trace);
  text.resize(text.size() / 2);
  std::ofstream(trace) << text;
  std::stringstream rout, rerr;
  EXPECT_EQ(cmd_replay(trace.string(), rout, rerr), kExitConfigError);
}

// --- other commands ------------------------------------------------------------------

TEST(VerifyLimits, SmallSweepPasses) {
  std::stringstream out, err;
  EXPECT_EQ(cmd_verify_limits(5, out, err), kExitPass);
  EXPECT_NE(out.str().find("PASS verify-limits disagreements=0"), std::string::npos);
  EXPECT_NE(out.str().find("5|3|1|unsafe|unsafe|-"), std::string::npos);
  EXPECT_EQ(cmd_verify_limits(1, out, err), kExitConfigError);
  EXPECT_EQ(cmd_verify_limits(13, out, err), kExitConfigError);
}

TEST(ProfileCommand, ExitCodes) {
  std::stringstream out, err;
  EXPECT_EQ(cmd_profile("vr", 5, SYNCFRAME_GOLDEN_PATH, out, err), kExitPass) << err.str();
  EXPECT_NE(out.str().find("vr|latency|changing|1.5"), std::string::npos);
  EXPECT_EQ(cmd_profile("vr", 2, SYNCFRAME_GOLDEN_PATH, out, err), kExitConfigError);
  EXPECT_EQ(cmd_profile("zab", 5, SYNCFRAME_GOLDEN_PATH, out, err), kExitConfigError);
  EXPECT_EQ(cmd_profile("broken-submajority-paxos", 5, SYNCFRAME_GOLDEN_PATH, out, err), kExitConfigError);
}

TEST(ProfileCommand, WrongReferenceIsCheckerFailure) {
  TempDir dir;
  auto golden = slurp(SYNCFRAME_GOLDEN_PATH);
  auto pos = golden.find("\"latency\": {\"-\": \"2\"}");
  ASSERT_NE(pos, std::string::npos);
  golden.replace(pos, 21, "\"latency\": {\"-\": \"3\"}");
  auto path = dir.write("golden.json", golden);
  std::stringstream out, err;
  EXPECT_EQ(cmd_profile("paxos", 3, path.string(), out, err), kExitCheckerFailure);
  EXPECT_NE(err.str().find("latency -: derived 2 expected 3"), std::string::npos) << err.str();
}

TEST(Binary, SubcommandsAndExitCodes) {
  TempDir dir;
  auto log = dir.path() / "out.txt";
  EXPECT_EQ(run_cli("verify-limits --n-max 4", log), 0) << slurp(log);
  EXPECT_EQ(run_cli("profile paxos --n 3", log), 0) << slurp(log);
  EXPECT_EQ(run_cli("campaign paxos --n 3 --f 1 --seeds 3", log), 0) << slurp(log);
  EXPECT_EQ(run_cli("bogus", log), 2);
  EXPECT_EQ(run_cli("profile paxos", log), 2);
  auto cfg = dir.write("run.json", kPaxos);
  EXPECT_EQ(run_cli("simulate " + cfg.string(), log), 0) << slurp(log);
  EXPECT_EQ(run_cli("replay " + (dir.path() / "syncframe-out" / "trace.log").string(), log), 0) << slurp(log);
}
