#pragma once

// Command implementations behind the `syncframe` binary. Each command takes
// its output streams explicitly and returns the process exit code.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncframe/analyzer/campaign.hpp"
#include "syncframe/analyzer/golden.hpp"
#include "syncframe/analyzer/limits.hpp"
#include "syncframe/analyzer/profile.hpp"
#include "syncframe/checkers.hpp"
#include "syncframe/mechanisms.hpp"

namespace syncframe {

enum ExitCode : int {
  kExitPass = 0,
  kExitCheckerFailure = 1,
  kExitConfigError = 2,
  kExitLivenessTimeout = 3,
  kExitCoverageFailure = 4,
  kExitReplayDivergence = 5,
};

inline constexpr const char* kConfigSchema = "syncframe.run/1";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  MechanismParams mechanism;
  SimConfig sim;
  Workload workload;
  /// Checker names; empty selects the defaults for the mechanism.
  std::vector<std::string> checkers;
  std::string output_dir;
};

inline const std::vector<std::string>& known_checkers() {
  static const std::vector<std::string> names = {"linearizable", "sec", "split-brain", "progress"};
  return names;
}

inline std::vector<std::string> default_checkers(MechanismKind kind) {
  if (kind == MechanismKind::CrdtGCounter || kind == MechanismKind::CrdtOrSet) return {"sec", "progress"};
  return {"split-brain", "progress"};
}

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

using nlohmann::json;

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] inline void bad(const std::string& field, const std::string& why) {
  throw ConfigError("field " + field + ": " + why);
}

inline void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) bad(where, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) bad(where + "." + k, "unknown field");
  }
}

inline std::int64_t get_int(const json& obj, const std::string& where, const char* key,
                            std::optional<std::int64_t> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    bad(where + "." + key, "missing");
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad(where + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

inline std::string get_string(const json& obj, const std::string& where, const char* key,
                              std::optional<std::string> fallback = std::nullopt) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    bad(where + "." + key, "missing");
  }
  const json& v = obj.at(key);
  if (!v.is_string()) bad(where + "." + key, "expected a string");
  return v.get<std::string>();
}

inline WriterId get_writer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) bad(where, "expected a writer id");
  return v.get<WriterId>();
}

inline MechanismParams parse_mechanism(const json& m, int n) {
  const std::string w = "mechanism";
  only_keys(m, w, {"kind", "retry_base", "quorum_threshold", "fast_quorum", "priority_tree", "fanout",
                   "gossip_delay", "projection"});
  auto kind = mechanism_from_string(get_string(m, w, "kind"));
  if (!kind) bad(w + ".kind", "unknown mechanism '" + m.at("kind").get<std::string>() + "'");
  MechanismParams p = default_params(*kind);
  p.retry_base = get_int(m, w, "retry_base", p.retry_base);
  if (p.retry_base < 1) bad(w + ".retry_base", "must be positive");
  p.quorum_threshold = static_cast<int>(get_int(m, w, "quorum_threshold", 0));
  if (p.quorum_threshold < 0 || p.quorum_threshold > n) bad(w + ".quorum_threshold", "must lie in [0, n]");
  std::string rounding = get_string(m, w, "fast_quorum", "floor");
  if (rounding == "floor") p.fast_quorum = FastQuorumRounding::Floor;
  else if (rounding == "ceil") p.fast_quorum = FastQuorumRounding::Ceil;
  else bad(w + ".fast_quorum", "expected \"floor\" or \"ceil\"");
  p.fanout = static_cast<int>(get_int(m, w, "fanout", 0));
  if (p.fanout < 0) bad(w + ".fanout", "must be non-negative");
  p.gossip_delay = get_int(m, w, "gossip_delay", 1);
  if (p.gossip_delay < 1) bad(w + ".gossip_delay", "must be positive");
  if (m.contains("projection")) {
    auto pk = projection_from_string(get_string(m, w, "projection"));
    if (!pk) bad(w + ".projection", "unknown projection");
    p.projection = *pk;
  }
  if (m.contains("priority_tree")) {
    const json& t = m.at("priority_tree");
    if (!t.is_object()) bad(w + ".priority_tree", "expected an object of child -> parent");
    std::map<WriterId, WriterId> parent;
    for (const auto& [child, par] : t.items()) {
      WriterId c = 0;
      try {
        std::size_t used = 0;
        c = std::stoi(child, &used);
        if (used != child.size()) throw std::invalid_argument(child);
      } catch (const std::logic_error&) {
        bad(w + ".priority_tree." + child, "keys must be writer ids");
      }
      parent[c] = get_writer(par, w + ".priority_tree." + child);
    }
    try {
      p.priority = PriorityTree(n, parent);
    } catch (const InvalidPriorityTree& e) {
      bad(w + ".priority_tree", e.what());
    }
  }
  return p;
}

inline FaultEvent parse_fault(const json& e, const std::string& w) {
  only_keys(e, w, {"tick", "crash", "recover", "partition", "heal"});
  FaultEvent ev;
  ev.tick = get_int(e, w, "tick");
  int actions = 0;
  if (e.contains("crash")) ev.action = Crash{get_writer(e.at("crash"), w + ".crash")}, ++actions;
  if (e.contains("recover")) ev.action = Recover{get_writer(e.at("recover"), w + ".recover")}, ++actions;
  if (e.contains("heal")) ev.action = Heal{}, ++actions;
  if (e.contains("partition")) {
    const json& groups = e.at("partition");
    if (!groups.is_array()) bad(w + ".partition", "expected an array of writer groups");
    Partition p;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const std::string gw = w + ".partition[" + std::to_string(i) + "]";
      if (!groups[i].is_array()) bad(gw, "expected an array of writer ids");
      std::set<WriterId> g;
      for (std::size_t j = 0; j < groups[i].size(); ++j)
        g.insert(get_writer(groups[i][j], gw + "[" + std::to_string(j) + "]"));
      p.groups.push_back(std::move(g));
    }
    ev.action = std::move(p);
    ++actions;
  }
  if (actions != 1) bad(w, "needs exactly one of crash, recover, partition, heal");
  return ev;
}

inline SimConfig parse_sim(const json& s) {
  const std::string w = "sim";
  only_keys(s, w, {"n", "seed", "min_delay", "max_delay", "drop_prob", "max_ticks", "fault_plan"});
  SimConfig c;
  c.n = static_cast<int>(get_int(s, w, "n"));
  if (c.n < 1 || c.n > 64) bad(w + ".n", "must lie in [1, 64]");
  std::int64_t seed = get_int(s, w, "seed", 1);
  if (seed < 0) bad(w + ".seed", "must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.min_delay = get_int(s, w, "min_delay", 1);
  c.max_delay = get_int(s, w, "max_delay", c.min_delay);
  if (c.min_delay < 1 || c.max_delay < c.min_delay) bad(w + ".max_delay", "delays must satisfy 1 <= min_delay <= max_delay");
  c.max_ticks = get_int(s, w, "max_ticks", c.max_ticks);
  if (c.max_ticks < 1) bad(w + ".max_ticks", "must be positive");
  if (s.contains("drop_prob")) {
    const json& d = s.at("drop_prob");
    if (!d.is_array() || d.size() != 2 || !d[0].is_number_unsigned() || !d[1].is_number_unsigned())
      bad(w + ".drop_prob", "expected [numerator, denominator]");
    c.drop_num = d[0].get<std::uint64_t>();
    c.drop_den = d[1].get<std::uint64_t>();
    if (c.drop_den == 0 || c.drop_num > c.drop_den) bad(w + ".drop_prob", "must lie in [0, 1]");
  }
  if (s.contains("fault_plan")) {
    const json& plan = s.at("fault_plan");
    if (!plan.is_array()) bad(w + ".fault_plan", "expected an array");
    std::vector<FaultEvent> events;
    for (std::size_t i = 0; i < plan.size(); ++i)
      events.push_back(parse_fault(plan[i], w + ".fault_plan[" + std::to_string(i) + "]"));
    c.fault_plan = FaultPlan(std::move(events));
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    bad(w + ".fault_plan", e.what());
  }
  return c;
}

inline Workload parse_workload(const json& arr, const SimConfig& sim) {
  if (!arr.is_array()) bad("workload", "expected an array");
  Workload out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string w = "workload[" + std::to_string(i) + "]";
    const json& item = arr[i];
    only_keys(item, w, {"writer", "key", "value", "tick", "op"});
    WorkloadItem it;
    it.writer = get_writer(item.contains("writer") ? item.at("writer") : json(), w + ".writer");
    if (it.writer < 0 || it.writer >= sim.n)
      bad(w + ".writer", "writer id " + std::to_string(it.writer) + " is not below n=" + std::to_string(sim.n));
    it.key = get_string(item, w, "key", "k");
    it.issue_tick = get_int(item, w, "tick", 0);
    if (it.issue_tick < 0 || it.issue_tick >= sim.max_ticks) bad(w + ".tick", "must lie in [0, max_ticks)");
    std::string op = get_string(item, w, "op", "write");
    if (op == "write") it.kind = OpKind::Write;
    else if (op == "read") it.kind = OpKind::Read;
    else if (op == "remove") it.kind = OpKind::Remove;
    else bad(w + ".op", "expected write, read or remove");
    it.value = get_string(item, w, "value", it.kind == OpKind::Read ? std::optional<std::string>("") : std::nullopt);
    out.push_back(std::move(it));
  }
  return out;
}

}  // namespace detail

/// Parses a `syncframe.run/1` document; errors name the offending field or
/// the line and column of a syntax error.
inline RunConfig parse_run_config(const std::string& text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("syntax error at " + detail::line_col(text, e.byte) + ": " + e.what());
  }
  detail::only_keys(doc, "<root>", {"schema", "mechanism", "sim", "workload", "checkers", "output_dir"});
  if (detail::get_string(doc, "<root>", "schema") != kConfigSchema)
    detail::bad("schema", std::string("expected \"") + kConfigSchema + "\"");
  RunConfig c;
  if (!doc.contains("sim")) detail::bad("sim", "missing");
  c.sim = detail::parse_sim(doc.at("sim"));
  if (!doc.contains("mechanism")) detail::bad("mechanism", "missing");
  c.mechanism = detail::parse_mechanism(doc.at("mechanism"), c.sim.n);
  c.workload = detail::parse_workload(doc.contains("workload") ? doc.at("workload") : json::array(), c.sim);
  if (doc.contains("checkers")) {
    const json& ch = doc.at("checkers");
    if (!ch.is_array()) detail::bad("checkers", "expected an array of names");
    for (std::size_t i = 0; i < ch.size(); ++i) {
      const std::string w = "checkers[" + std::to_string(i) + "]";
      if (!ch[i].is_string()) detail::bad(w, "expected a string");
      auto name = ch[i].get<std::string>();
      const auto& known = known_checkers();
      if (std::find(known.begin(), known.end(), name) == known.end()) detail::bad(w, "unknown checker '" + name + "'");
      c.checkers.push_back(name);
    }
  }
  c.output_dir = detail::get_string(doc, "<root>", "output_dir", "");
  return c;
}

/// Canonical single-line form; parsing it back yields the same config.
inline std::string config_to_json(const RunConfig& c) {
  using detail::json;
  json m = {{"kind", to_string(c.mechanism.kind)},
            {"retry_base", c.mechanism.retry_base},
            {"quorum_threshold", c.mechanism.quorum_threshold},
            {"fast_quorum", c.mechanism.fast_quorum == FastQuorumRounding::Floor ? "floor" : "ceil"},
            {"fanout", c.mechanism.fanout},
            {"gossip_delay", c.mechanism.gossip_delay},
            {"projection", to_string(c.mechanism.projection)}};
  if (c.mechanism.priority) {
    json t = json::object();
    for (const auto& [child, par] : c.mechanism.priority->parents()) t[std::to_string(child)] = par;
    m["priority_tree"] = t;
  }
  json plan = json::array();
  for (const auto& e : c.sim.fault_plan.events()) {
    json j = {{"tick", e.tick}};
    if (auto* cr = std::get_if<Crash>(&e.action)) j["crash"] = cr->writer;
    else if (auto* r = std::get_if<Recover>(&e.action)) j["recover"] = r->writer;
    else if (auto* p = std::get_if<Partition>(&e.action)) j["partition"] = p->groups;
    else j["heal"] = true;
    plan.push_back(j);
  }
  json sim = {{"n", c.sim.n},
              {"seed", c.sim.seed},
              {"min_delay", c.sim.min_delay},
              {"max_delay", c.sim.max_delay},
              {"drop_prob", {c.sim.drop_num, c.sim.drop_den}},
              {"max_ticks", c.sim.max_ticks},
              {"fault_plan", plan}};
  json work = json::array();
  for (const auto& w : c.workload)
    work.push_back({{"writer", w.writer}, {"key", w.key}, {"value", w.value}, {"tick", w.issue_tick},
                    {"op", to_string(w.kind)}});
  json doc = {{"schema", kConfigSchema}, {"mechanism", m}, {"sim", sim}, {"workload", work},
              {"checkers", c.checkers}};
  if (!c.output_dir.empty()) doc["output_dir"] = c.output_dir;
  return doc.dump();
}

// ---------------------------------------------------------------------------
// Simulation

struct SimulationOutcome {
  RunResult result;
  std::vector<Verdict> verdicts;
  int exit_code = kExitPass;
};

inline SimulationOutcome simulate(const RunConfig& c) {
  SimulationOutcome out;
  out.result = run_mechanism(c.sim, c.mechanism, c.workload);
  const RunResult& r = out.result;
  std::set<WriterId> down;
  for (WriterId i = 0; i < c.sim.n; ++i)
    if (!r.live.contains(i)) down.insert(i);
  auto regs = r.writer_registers(c.sim.n);

  bool safety_failed = false, progress_failed = false;
  auto names = c.checkers.empty() ? default_checkers(c.mechanism.kind) : c.checkers;
  for (const auto& name : names) {
    Verdict v;
    if (name == "linearizable") {
      v = check_linearizable(r.history, c.mechanism.projection);
    } else if (name == "sec") {
      v = check_sec(regs, delivered_sets(regs));
    } else if (name == "split-brain") {
      v = detect_split_brain(regs, r.live);
    } else {
      v = detect_progress(r.history, c.workload, r.end_tick, down);
      if (!v.passed()) progress_failed = true;
    }
    if (!v.passed() && name != "progress") safety_failed = true;
    out.verdicts.push_back(std::move(v));
  }

  bool unfinished = false;
  for (std::size_t i = 0; i < c.workload.size(); ++i)
    if (!r.history.responded(static_cast<RequestId>(i)) && !down.contains(c.workload[i].writer)) unfinished = true;

  if (safety_failed) out.exit_code = kExitCheckerFailure;
  else if (r.status != RunStatus::Quiescent && unfinished) out.exit_code = kExitLivenessTimeout;
  else if (progress_failed) out.exit_code = kExitCheckerFailure;
  return out;
}

/// Trace file: `#config <json>`, the records, then `#digest <hex> <count>`.
inline std::string trace_file_text(const RunConfig& c, const RunResult& r) {
  std::string s = "#config " + config_to_json(c) + "\n";
  for (const auto& l : r.trace) s += l + "\n";
  s += "#digest " + hex_digest(r.digest) + " " + std::to_string(r.trace.size()) + "\n";
  return s;
}

inline std::string history_file_text(const History& h) {
  std::string s;
  for (const auto& e : h.events()) {
    s += std::to_string(e.time) + "|" + std::to_string(e.replica) + "|";
    if (auto* inv = std::get_if<Invoke>(&e.event)) {
      s += "invoke|" + describe(inv->op);
    } else if (auto* r = std::get_if<Respond>(&e.event)) {
      s += "respond|req=" + std::to_string(r->id) +
           (r->result.status == OpResult::Status::Ok ? " ok" : " aborted");
      if (r->result.read_value) s += " value=" + *r->result.read_value;
    } else {
      s += "commit|" + describe(std::get<Commit>(e.event).write);
    }
    s += "\n";
  }
  return s;
}

/// `index|driver|case|path|rtts|quorum sizes|converged|aborted|arbiter|epoch|start|end`
inline std::string pass_record(const PassTrace& p) {
  std::string path, quorums, conv, ab;
  for (auto st : p.path) path += (path.empty() ? "" : ",") + to_string(st);
  for (const auto& q : p.quorums) quorums += (quorums.empty() ? "" : ",") + to_string(q.stage) + ":" + std::to_string(q.size());
  for (const auto& w : p.converged) conv += (conv.empty() ? "" : ",") + to_string(w.id());
  for (const auto& w : p.aborted) ab += (ab.empty() ? "" : ",") + to_string(w.id());
  return std::to_string(p.pass_index) + "|" + std::to_string(p.driver) + "|" + p.case_label + "|" + path + "|" +
         p.total_rtts().to_string() + "|" + quorums + "|" + conv + "|" + (ab.empty() ? "-" : ab) + "|" +
         to_string(p.arbiter_kind) + "|" + std::to_string(p.epoch) + "|" + std::to_string(p.start_tick) + "|" +
         std::to_string(p.end_tick);
}

namespace detail {
inline std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

/// SYNCFRAME_SEED, when set, replaces the configured seed.
inline std::optional<std::uint64_t> seed_override() {
  const char* env = std::getenv("SYNCFRAME_SEED");
  if (!env || !*env) return std::nullopt;
  try {
    std::size_t used = 0;
    auto v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(std::string("SYNCFRAME_SEED is not an unsigned integer: ") + env);
  }
}
}  // namespace detail

inline int cmd_simulate(const std::string& config_path, std::ostream& out, std::ostream& err) {
  auto text = detail::read_file(config_path);
  if (!text) {
    err << "error: cannot read config " << config_path << "\n";
    return kExitConfigError;
  }
  RunConfig c;
  try {
    c = parse_run_config(*text);
    if (auto s = detail::seed_override()) c.sim.seed = *s;
  } catch (const ConfigError& e) {
    err << "error: " << config_path << ": " << e.what() << "\n";
    return kExitConfigError;
  }
  SimulationOutcome o;
  try {
    o = simulate(c);
  } catch (const TooLarge& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  std::filesystem::path dir = c.output_dir.empty() ? std::filesystem::path("syncframe-out") : std::filesystem::path(c.output_dir);
  if (dir.is_relative()) dir = std::filesystem::absolute(std::filesystem::path(config_path)).parent_path() / dir;
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "trace.log", trace_file_text(c, o.result));
  detail::write_file(dir / "history.log", history_file_text(o.result.history));
  std::string passes;
  for (const auto& p : o.result.passes) passes += pass_record(p) + "\n";
  detail::write_file(dir / "passes.log", passes);
  detail::write_file(dir / "digest.txt", hex_digest(o.result.digest) + "\n");
  std::string verdicts;
  for (const auto& v : o.verdicts) verdicts += v.to_line() + "\n";
  detail::write_file(dir / "verdicts.txt", verdicts);

  out << verdicts;
  out << "status " << to_string(o.result.status) << " end_tick=" << o.result.end_tick << "\n";
  out << "digest " << hex_digest(o.result.digest) << "\n";
  if (o.exit_code == kExitLivenessTimeout) err << "error: run ended " << to_string(o.result.status) << " with unfinished operations\n";
  return o.exit_code;
}

inline int cmd_replay(const std::string& trace_path, std::ostream& out, std::ostream& err) {
  auto text = detail::read_file(trace_path);
  if (!text) {
    err << "error: cannot read trace " << trace_path << "\n";
    return kExitConfigError;
  }
  std::vector<std::string> lines;
  std::stringstream ss(*text);
  for (std::string l; std::getline(ss, l);) lines.push_back(l);
  if (lines.size() < 2 || lines.front().rfind("#config ", 0) != 0 || lines.back().rfind("#digest ", 0) != 0 ||
      text->back() != '\n') {
    err << "error: " << trace_path << " is not a complete trace (missing #config header or #digest trailer)\n";
    return kExitConfigError;
  }
  RunConfig c;
  try {
    c = parse_run_config(lines.front().substr(8));
  } catch (const ConfigError& e) {
    err << "error: embedded config: " << e.what() << "\n";
    return kExitConfigError;
  }
  std::string recorded_digest;
  std::size_t recorded_count = 0;
  {
    std::stringstream tr(lines.back().substr(8));
    if (!(tr >> recorded_digest >> recorded_count)) {
      err << "error: malformed #digest trailer\n";
      return kExitConfigError;
    }
  }
  std::vector<std::string> recorded(lines.begin() + 1, lines.end() - 1);
  if (recorded.size() != recorded_count) {
    err << "error: trailer announces " << recorded_count << " records but the file holds " << recorded.size() << "\n";
    return kExitConfigError;
  }

  auto r = run_mechanism(c.sim, c.mechanism, c.workload);
  const std::size_t common = std::min(recorded.size(), r.trace.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (recorded[i] != r.trace[i]) {
      err << "divergence at record " << i + 1 << "\n  recorded: " << recorded[i] << "\n  replayed: " << r.trace[i] << "\n";
      return kExitReplayDivergence;
    }
  }
  if (recorded.size() != r.trace.size()) {
    err << "divergence: recorded " << recorded.size() << " records, replay produced " << r.trace.size() << "\n";
    return kExitReplayDivergence;
  }
  const std::string digest = hex_digest(r.digest);
  if (digest != recorded_digest || hex_digest(digest_lines(recorded)) != recorded_digest) {
    err << "divergence: digest " << digest << " vs recorded " << recorded_digest << "\n";
    return kExitReplayDivergence;
  }
  out << "replay identical: " << r.trace.size() << " records, digest " << digest << "\n";
  return kExitPass;
}

inline int cmd_profile(const std::string& mechanism, int n, const std::string& golden_path, std::ostream& out,
                       std::ostream& err) {
  auto kind = mechanism_from_string(mechanism);
  if (!kind) {
    err << "error: unknown mechanism '" << mechanism << "'\n";
    return kExitConfigError;
  }
  if (n < 3) {
    err << "error: profile needs n >= 3\n";
    return kExitConfigError;
  }
  GoldenTable golden;
  try {
    golden = GoldenTable::load(golden_path);
  } catch (const GoldenError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  if (!golden.has(*kind)) {
    err << "error: no reference row for " << mechanism << "\n";
    return kExitConfigError;
  }
  MechanismProfile derived;
  try {
    derived = derive_profile(*kind, canonical_traces(*kind, n), n);
  } catch (const IncompleteCoverage& e) {
    err << "error: " << e.what() << "\n";
    return kExitCoverageFailure;
  }
  for (const auto& rec : profile_records(*kind, derived)) out << rec.to_line() << "\n";
  out << "\n" << render_table({{*kind, derived}}, &golden);
  auto diff = profile_diff(*kind, derived, golden.profile(*kind, n));
  if (!diff.empty()) {
    for (const auto& d : diff) err << "mismatch: " << d << "\n";
    return kExitCheckerFailure;
  }
  out << "matches reference at n=" << n << "\n";
  return kExitPass;
}

inline int cmd_verify_limits(int n_max, std::ostream& out, std::ostream& err) {
  if (n_max < 2 || n_max > kMaxEnumerationN) {
    err << "error: --n-max must lie in [2, " << kMaxEnumerationN << "]\n";
    return kExitConfigError;
  }
  std::vector<std::string> failures;
  auto emit = [&](const char* title, const LimitSweep& s) {
    out << "# " << title << "\n";
    for (const auto& r : s.reports) out << r.to_line() << "\n";
    failures.insert(failures.end(), s.failures.begin(), s.failures.end());
  };
  emit("dynamic bound vs ROLL (n|q|f|formula|oracle|witness)", roll_equivalence(n_max));
  emit("static bound vs enumeration (n|q|f|formula|oracle|witness)", static_sweep(n_max));
  auto qs = quorum_sweep(n_max);
  auto ms = monotonicity_sweep(n_max);
  failures.insert(failures.end(), qs.failures.begin(), qs.failures.end());
  failures.insert(failures.end(), ms.failures.begin(), ms.failures.end());
  out << "# max_uncovered and split_brain_possible for n<=" << n_max << ": "
      << (qs.ok() ? "agree" : "DISAGREE") << "\n";
  out << "# monotonicity and cap for n<=" << n_max << ": " << (ms.ok() ? "hold" : "VIOLATED") << "\n";
  for (const auto& f : failures) err << "disagreement: " << f << "\n";
  out << (failures.empty() ? "PASS" : "FAIL") << " verify-limits disagreements=" << failures.size() << "\n";
  return failures.empty() ? kExitPass : kExitCheckerFailure;
}

inline int cmd_campaign(const std::string& mechanism, int n, int f, int seeds, unsigned jobs, std::ostream& out,
                        std::ostream& err) {
  auto kind = mechanism_from_string(mechanism);
  if (!kind) {
    err << "error: unknown mechanism '" << mechanism << "'\n";
    return kExitConfigError;
  }
  if (n < 1 || f < 0 || f > n - 1 || seeds < 1) {
    err << "error: need n >= 1, 0 <= f <= n-1 and seeds >= 1\n";
    return kExitConfigError;
  }
  auto s = fault_campaign(*kind, n, f, seed_range(static_cast<std::size_t>(seeds)), jobs);
  for (const auto& r : s.failed) {
    out << "seed " << r.setup.seed << " [" << r.setup.scenario << "] status=" << to_string(r.status) << "\n";
    if (!r.progress.passed()) out << "  " << r.progress.to_line() << "\n";
    if (!r.safety.passed()) out << "  " << r.safety.to_line() << "\n";
  }
  out << to_string(*kind) << " n=" << n << " f=" << f << " " << s.to_line() << "\n";
  return s.progress_failures == 0 && s.safety_failures == 0 ? kExitPass : kExitCheckerFailure;
}

}  // namespace syncframe
