#pragma once

// Domain types for multi-writer to single-writer convergence: writes,
// registers with projection actions, quorums, pass traces, property
// profiles and the global history consumed by the checkers.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace syncframe {

using Tick = std::int64_t;
using WriterId = int;
using RequestId = std::uint64_t;

struct OpId {
  WriterId writer = 0;
  std::uint64_t seq = 0;

  auto operator<=>(const OpId&) const = default;
};

inline std::string to_string(const OpId& id) {
  return std::to_string(id.writer) + "." + std::to_string(id.seq);
}

/// A write value. The null value (phi) is a distinguished state, never an
/// empty payload, so metadata-only writes stay distinguishable from writes
/// of "".
class Value {
 public:
  Value() = default;
  static Value phi() { return Value{}; }
  static Value of(std::string bytes) {
    Value v;
    v.bytes_ = std::move(bytes);
    return v;
  }

  bool is_phi() const { return !bytes_.has_value(); }
  const std::string& bytes() const {
    if (!bytes_) throw std::logic_error("phi value has no payload");
    return *bytes_;
  }
  std::string to_string() const { return bytes_ ? *bytes_ : std::string("φ"); }

  bool operator==(const Value&) const = default;

 private:
  std::optional<std::string> bytes_;
};

struct Metadata {
  std::optional<std::uint64_t> ballot;
  std::optional<std::uint64_t> logical_time;
  std::optional<std::set<OpId>> deps;
  /// Lower number = higher priority.
  std::optional<std::uint64_t> priority;
  std::optional<std::uint64_t> view;

  bool empty() const {
    return !ballot && !logical_time && !deps && !priority && !view;
  }
  bool operator==(const Metadata&) const = default;
};

struct WriteOp {
  WriterId writer_id = 0;
  std::uint64_t op_seq = 0;
  Value value;
  Metadata meta;
  /// Conflict domain; writes on different keys commute.
  std::string key;
  /// Client request this write serves, if any.
  std::optional<RequestId> origin;

  OpId id() const { return {writer_id, op_seq}; }
  bool operator==(const WriteOp&) const = default;
};

/// Builds a value-carrying write.
inline WriteOp make_write(WriterId writer, std::uint64_t seq, std::string key,
                          std::string value, Metadata meta = {},
                          std::optional<RequestId> origin = std::nullopt) {
  return WriteOp{writer, seq, Value::of(std::move(value)), std::move(meta),
                 std::move(key), origin};
}

/// Builds a phi-valued write. Metadata is mandatory: a phi write exists only
/// to spread coordination facts.
inline WriteOp make_meta_write(WriterId writer, std::uint64_t seq,
                               Metadata meta, std::string key = {},
                               std::optional<RequestId> origin = std::nullopt) {
  if (meta.empty())
    throw std::invalid_argument("phi-valued write requires metadata");
  return WriteOp{writer, seq, Value::phi(), std::move(meta), std::move(key),
                 origin};
}

// ---------------------------------------------------------------------------
// Projection

enum class ProjectionKind { LastWrite, Sum, SetUnion, LogSequence };

inline std::string to_string(ProjectionKind k) {
  switch (k) {
    case ProjectionKind::LastWrite: return "last-write";
    case ProjectionKind::Sum: return "sum";
    case ProjectionKind::SetUnion: return "set-union";
    case ProjectionKind::LogSequence: return "log-sequence";
  }
  return "?";
}

inline std::optional<ProjectionKind> projection_from_string(const std::string& s) {
  for (auto k : {ProjectionKind::LastWrite, ProjectionKind::Sum,
                 ProjectionKind::SetUnion, ProjectionKind::LogSequence})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct EmptyProjection {
  bool operator==(const EmptyProjection&) const = default;
};

namespace detail {
template <class Range>
std::string join(const Range& items, char open, char close) {
  std::string out(1, open);
  bool first = true;
  for (const auto& item : items) {
    if (!first) out += ',';
    out += item;
    first = false;
  }
  out += close;
  return out;
}
}  // namespace detail

struct Projection {
  std::variant<EmptyProjection, std::string, std::int64_t,
               std::set<std::string>, std::vector<std::string>>
      result;

  bool is_empty() const { return std::holds_alternative<EmptyProjection>(result); }
  bool operator==(const Projection&) const = default;

  std::string to_string() const {
    struct Render {
      std::string operator()(const EmptyProjection&) const { return "<empty>"; }
      std::string operator()(const std::string& s) const { return s; }
      std::string operator()(std::int64_t v) const { return std::to_string(v); }
      std::string operator()(const std::set<std::string>& s) const { return detail::join(s, '{', '}'); }
      std::string operator()(const std::vector<std::string>& s) const { return detail::join(s, '[', ']'); }
    };
    return std::visit(Render{}, result);
  }
};

class ProjectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Applies a projection action to a sequence of committed writes. Phi-valued
/// writes are coordination markers and contribute no value; under SetUnion a
/// phi write's deps name the add-tags it removes (observed-remove set).
template <class Range>
Projection project_series(const Range& series, ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::LastWrite: {
      for (auto it = std::rbegin(series); it != std::rend(series); ++it)
        if (!it->value.is_phi()) return {it->value.bytes()};
      return {EmptyProjection{}};
    }
    case ProjectionKind::Sum: {
      std::int64_t total = 0;
      for (const WriteOp& w : series) {
        if (w.value.is_phi()) continue;
        try {
          std::size_t used = 0;
          total += std::stoll(w.value.bytes(), &used);
          if (used != w.value.bytes().size()) throw std::invalid_argument("");
        } catch (const std::logic_error&) {
          throw ProjectionError("sum projection over non-integer value '" +
                                w.value.bytes() + "'");
        }
      }
      return {total};
    }
    case ProjectionKind::SetUnion: {
      std::set<OpId> removed;
      for (const WriteOp& w : series)
        if (w.value.is_phi() && w.meta.deps)
          removed.insert(w.meta.deps->begin(), w.meta.deps->end());
      std::set<std::string> out;
      for (const WriteOp& w : series)
        if (!w.value.is_phi() && !removed.contains(w.id()))
          out.insert(w.value.bytes());
      return {std::move(out)};
    }
    case ProjectionKind::LogSequence: {
      std::vector<std::string> out;
      for (const WriteOp& w : series)
        if (!w.value.is_phi()) out.push_back(w.value.bytes());
      return {std::move(out)};
    }
  }
  throw std::logic_error("unknown projection kind");
}

// ---------------------------------------------------------------------------
// Register

class DuplicateCommit : public std::runtime_error {
 public:
  explicit DuplicateCommit(const OpId& id)
      : std::runtime_error("duplicate commit of write " + syncframe::to_string(id)) {}
};

/// Append-only address series of one replica.
class Register {
 public:
  Register() = default;
  Register(WriterId replica_id, ProjectionKind projection)
      : replica_id_(replica_id), projection_(projection) {}

  WriterId replica_id() const { return replica_id_; }
  ProjectionKind projection_kind() const { return projection_; }
  const std::vector<WriteOp>& series() const { return series_; }
  std::size_t size() const { return series_.size(); }
  bool contains(const OpId& id) const { return ids_.contains(id); }

  void append_committed(WriteOp w) {
    if (!ids_.insert(w.id()).second) throw DuplicateCommit(w.id());
    series_.push_back(std::move(w));
  }

  Projection project() const { return project_series(series_, projection_); }

  /// Projection of the writes on one key only.
  Projection project(const std::string& key) const {
    return project_series(key_series(key), projection_);
  }

  std::vector<WriteOp> key_series(const std::string& key) const {
    std::vector<WriteOp> out;
    for (const auto& w : series_)
      if (w.key == key) out.push_back(w);
    return out;
  }

  std::set<std::string> keys() const {
    std::set<std::string> out;
    for (const auto& w : series_) out.insert(w.key);
    return out;
  }

  bool operator==(const Register& o) const {
    return replica_id_ == o.replica_id_ && projection_ == o.projection_ &&
           series_ == o.series_;
  }

 private:
  WriterId replica_id_ = 0;
  ProjectionKind projection_ = ProjectionKind::LastWrite;
  std::vector<WriteOp> series_;
  std::set<OpId> ids_;
};

inline Projection project(const Register& r) { return r.project(); }

inline Register append_committed(Register r, WriteOp w) {
  r.append_committed(std::move(w));
  return r;
}

// ---------------------------------------------------------------------------
// Stages, quorums, round trips

enum class Stage { Pre, Exe };

inline std::string to_string(Stage s) { return s == Stage::Pre ? "pre" : "exe"; }

struct Quorum {
  std::set<WriterId> members;
  Stage stage = Stage::Exe;

  std::size_t size() const { return members.size(); }
  bool operator==(const Quorum&) const = default;
};

inline Quorum make_quorum(int n, std::set<WriterId> members, Stage stage) {
  if (members.empty() || static_cast<int>(members.size()) > n)
    throw std::invalid_argument("quorum size out of range");
  for (WriterId w : members)
    if (w < 0 || w >= n) throw std::invalid_argument("quorum member out of range");
  return Quorum{std::move(members), stage};
}

/// Latency in round trips, held as a count of half round trips so that
/// one-way messages (0.5) and view-change broadcasts (1.5) stay exact.
struct RoundTrips {
  int halves = 0;

  static constexpr RoundTrips whole(int rtts) { return {2 * rtts}; }
  static constexpr RoundTrips half() { return {1}; }
  static constexpr RoundTrips from_halves(int h) { return {h}; }

  double value() const { return halves / 2.0; }
  std::string to_string() const {
    std::string s = std::to_string(halves / 2);
    if (halves % 2) s += ".5";
    return s;
  }
  static std::optional<RoundTrips> parse(const std::string& s) {
    try {
      std::size_t used = 0;
      double d = std::stod(s, &used);
      if (used != s.size() || d < 0) return std::nullopt;
      double h = d * 2;
      if (h != static_cast<double>(static_cast<int>(h))) return std::nullopt;
      return RoundTrips{static_cast<int>(h)};
    } catch (const std::logic_error&) {
      return std::nullopt;
    }
  }

  RoundTrips& operator+=(RoundTrips o) {
    halves += o.halves;
    return *this;
  }
  friend RoundTrips operator+(RoundTrips a, RoundTrips b) { return a += b; }
  auto operator<=>(const RoundTrips&) const = default;
};

// ---------------------------------------------------------------------------
// Pass traces

enum class ArbiterKind { Static, Dynamic, None };

inline std::string to_string(ArbiterKind a) {
  switch (a) {
    case ArbiterKind::Static: return "static";
    case ArbiterKind::Dynamic: return "dynamic";
    case ArbiterKind::None: return "none";
  }
  return "?";
}

/// One pass of synchronization: a walk from the concurrent write set W to
/// the converged set w through pre and/or exe.
struct PassTrace {
  std::uint64_t pass_index = 0;
  std::vector<Stage> path;
  std::map<Stage, RoundTrips> rtts_per_stage;
  std::vector<Quorum> quorums;
  std::vector<WriteOp> converged;
  std::vector<WriteOp> aborted;
  ArbiterKind arbiter_kind = ArbiterKind::None;

  /// Mechanism-specific case ("fast", "electing", ...); "-" for none.
  std::string case_label = "-";
  /// Leadership epoch (term or view) the converged writes were issued in;
  /// 0 for leaderless mechanisms.
  std::uint64_t epoch = 0;
  WriterId driver = 0;
  Tick start_tick = 0;
  std::optional<Tick> pre_done_tick;
  Tick end_tick = 0;

  RoundTrips total_rtts() const {
    RoundTrips total;
    for (const auto& [stage, r] : rtts_per_stage) total += r;
    return total;
  }
};

inline bool valid_path(const std::vector<Stage>& path) {
  using enum Stage;
  return path == std::vector{Pre} || path == std::vector{Pre, Exe} ||
         path == std::vector{Exe};
}

/// Checks the structural invariants of a completed pass.
inline void validate_pass(const PassTrace& p) {
  if (!valid_path(p.path)) throw std::invalid_argument("pass path is not a walk of the stage diagram");
  if (p.converged.empty()) throw std::invalid_argument("completed pass has empty converged set");
  for (const auto& c : p.converged)
    for (const auto& a : p.aborted)
      if (c.id() == a.id()) throw std::invalid_argument("write both converged and aborted");
  for (const auto& [stage, r] : p.rtts_per_stage) {
    if (r.halves < 0) throw std::invalid_argument("negative latency");
    if (std::find(p.path.begin(), p.path.end(), stage) == p.path.end())
      throw std::invalid_argument("latency recorded for a stage off the path");
  }
}

// ---------------------------------------------------------------------------
// Consistency classification and profiles

enum class Consistency { Linearizable, Sequential, Eventual };

inline std::string to_string(Consistency c) {
  switch (c) {
    case Consistency::Linearizable: return "linearizable";
    case Consistency::Sequential: return "sequential";
    case Consistency::Eventual: return "eventual";
  }
  return "?";
}

inline std::optional<Consistency> consistency_from_string(const std::string& s) {
  for (auto c : {Consistency::Linearizable, Consistency::Sequential, Consistency::Eventual})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// |w| = 1 everywhere means each converged write is totally ordered with its
/// neighbours. Larger sets are unordered inside; if writes of one writer never
/// share a set the per-writer order survives (sequential), otherwise nothing
/// is promised beyond convergence (eventual).
inline Consistency classify_consistency(const std::vector<PassTrace>& traces,
                                        bool per_writer_ordered) {
  if (traces.empty()) throw InsufficientData("no completed passes to classify");
  bool all_single = true;
  bool co_resident = false;
  for (const auto& t : traces) {
    if (t.converged.size() != 1) all_single = false;
    std::set<WriterId> seen;
    for (const auto& w : t.converged)
      if (!seen.insert(w.writer_id).second) co_resident = true;
  }
  if (all_single) return Consistency::Linearizable;
  if (per_writer_ordered && !co_resident) return Consistency::Sequential;
  return Consistency::Eventual;
}

/// Closed range of quorum sizes; lo == hi for an exact loading.
struct LoadingRange {
  int lo = 0;
  int hi = 0;

  std::string to_string() const {
    if (lo == hi) return std::to_string(lo);
    return "[" + std::to_string(lo) + "," + std::to_string(hi) + "]";
  }
  bool operator==(const LoadingRange&) const = default;
};

struct MechanismProfile {
  Consistency consistency = Consistency::Linearizable;
  int writing_freedom = 1;
  std::map<std::string, RoundTrips> latency_rtt;
  std::map<std::string, LoadingRange> loading;
  int fault_tolerance = 0;

  bool operator==(const MechanismProfile&) const = default;
};

// ---------------------------------------------------------------------------
// History

enum class OpKind { Write, Read, Remove };

inline std::string to_string(OpKind k) {
  switch (k) {
    case OpKind::Write: return "write";
    case OpKind::Read: return "read";
    case OpKind::Remove: return "remove";
  }
  return "?";
}

/// A client operation as issued against one writer.
struct ClientOp {
  RequestId id = 0;
  WriterId writer = 0;
  OpKind kind = OpKind::Write;
  std::string key;
  std::string value;

  bool operator==(const ClientOp&) const = default;
};

struct OpResult {
  enum class Status { Ok, Aborted };
  Status status = Status::Ok;
  std::optional<std::string> read_value;

  bool operator==(const OpResult&) const = default;
};

struct Invoke {
  ClientOp op;
};
struct Respond {
  RequestId id = 0;
  OpResult result;
};
struct Commit {
  WriteOp write;
};

struct HistoryEvent {
  Tick time = 0;
  WriterId replica = 0;
  std::variant<Invoke, Respond, Commit> event;
};

class HistoryError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Global timeline. Enforces non-decreasing time and invoke-before-respond.
class History {
 public:
  void add(HistoryEvent e) {
    if (!events_.empty() && e.time < events_.back().time)
      throw HistoryError("history time went backwards");
    if (auto* inv = std::get_if<Invoke>(&e.event)) {
      if (!invoked_.insert(inv->op.id).second)
        throw HistoryError("request invoked twice");
    } else if (auto* r = std::get_if<Respond>(&e.event)) {
      if (!invoked_.contains(r->id))
        throw HistoryError("respond without matching invoke");
      if (!responded_.insert(r->id).second)
        throw HistoryError("request responded twice");
    }
    events_.push_back(std::move(e));
  }

  void invoke(Tick t, WriterId replica, ClientOp op) {
    add({t, replica, Invoke{std::move(op)}});
  }
  void respond(Tick t, WriterId replica, RequestId id, OpResult result) {
    add({t, replica, Respond{id, std::move(result)}});
  }
  void commit(Tick t, WriterId replica, WriteOp w) {
    add({t, replica, Commit{std::move(w)}});
  }

  const std::vector<HistoryEvent>& events() const { return events_; }
  bool responded(RequestId id) const { return responded_.contains(id); }
  bool invoked(RequestId id) const { return invoked_.contains(id); }
  bool empty() const { return events_.empty(); }

 private:
  std::vector<HistoryEvent> events_;
  std::set<RequestId> invoked_;
  std::set<RequestId> responded_;
};

}  // namespace syncframe
