#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "syncframe/core_model.hpp"

namespace syncframe {

enum class MechanismKind {
  Paxos,
  Raft,
  VR,
  EPaxos,
  EPaxosPriority,
  CrdtGCounter,
  CrdtOrSet,
  AtomicCas,
  /// Unsafe: Paxos committing on floor(n/2) agreements. Exists only to show
  /// that the minority fault bound is tight.
  BrokenSubMajorityPaxos,
};

inline const std::vector<MechanismKind>& all_mechanisms() {
  static const std::vector<MechanismKind> all{
      MechanismKind::Paxos,        MechanismKind::Raft,           MechanismKind::VR,
      MechanismKind::EPaxos,       MechanismKind::EPaxosPriority, MechanismKind::CrdtGCounter,
      MechanismKind::CrdtOrSet,    MechanismKind::AtomicCas,      MechanismKind::BrokenSubMajorityPaxos};
  return all;
}

inline std::string to_string(MechanismKind k) {
  switch (k) {
    case MechanismKind::Paxos: return "paxos";
    case MechanismKind::Raft: return "raft";
    case MechanismKind::VR: return "vr";
    case MechanismKind::EPaxos: return "epaxos";
    case MechanismKind::EPaxosPriority: return "epaxos-priority";
    case MechanismKind::CrdtGCounter: return "crdt-gcounter";
    case MechanismKind::CrdtOrSet: return "crdt-orset";
    case MechanismKind::AtomicCas: return "atomic-cas";
    case MechanismKind::BrokenSubMajorityPaxos: return "broken-submajority-paxos";
  }
  return "?";
}

inline std::optional<MechanismKind> mechanism_from_string(const std::string& s) {
  for (auto k : all_mechanisms())
    if (to_string(k) == s) return k;
  return std::nullopt;
}

inline bool is_linearizable_kind(MechanismKind k) {
  return k != MechanismKind::CrdtGCounter && k != MechanismKind::CrdtOrSet;
}

inline int majority(int n) { return n / 2 + 1; }  // == ceil((n+1)/2)

class UnknownCase : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Fast-quorum rounding. The property table prints floor(3n/4); the EPaxos
/// prose uses the ceiling, available as an override.
enum class FastQuorumRounding { Floor, Ceil };

/// Loading of one (mechanism, stage, case) cell evaluated at n. Case "-"
/// selects the single case of mechanisms without labelled loading.
inline int quorum_size(MechanismKind kind, Stage stage, const std::string& path_case, int n,
                       FastQuorumRounding rounding = FastQuorumRounding::Floor) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  auto unknown = [&]() -> int {
    throw UnknownCase("no loading cell (" + to_string(kind) + ", " + to_string(stage) + ", " +
                      path_case + ")");
  };
  switch (kind) {
    case MechanismKind::Paxos:
      if (path_case != "-") return unknown();
      return stage == Stage::Pre ? n : majority(n);
    case MechanismKind::BrokenSubMajorityPaxos:
      if (path_case != "-") return unknown();
      return std::max(1, n / 2);
    case MechanismKind::Raft:
      if ((stage == Stage::Pre && path_case == "electing") ||
          (stage == Stage::Exe && path_case == "elected"))
        return n;
      return unknown();
    case MechanismKind::VR:
      if ((stage == Stage::Pre && path_case == "changing") ||
          (stage == Stage::Exe && path_case == "normal"))
        return n;
      return unknown();
    case MechanismKind::EPaxos:
    case MechanismKind::EPaxosPriority:
      if (stage != Stage::Exe) return unknown();
      if (path_case == "fast") {
        int q = rounding == FastQuorumRounding::Floor ? (3 * n) / 4 : (3 * n + 3) / 4;
        // Below n = 3 the table value drops under a majority and two fast
        // quorums could miss each other.
        return std::max(q, majority(n));
      }
      if (path_case == "slow") return majority(n);
      return unknown();
    case MechanismKind::CrdtGCounter:
    case MechanismKind::CrdtOrSet:
      if (stage != Stage::Exe) return unknown();
      if (path_case == "broadcast") return n;
      if (path_case == "local") return 1;
      return unknown();
    case MechanismKind::AtomicCas:
      if (stage != Stage::Exe || path_case != "-") return unknown();
      return n;
  }
  return unknown();
}

/// Declared fault-tolerance bound of each mechanism.
inline int declared_fault_tolerance(MechanismKind kind, int n) {
  switch (kind) {
    case MechanismKind::CrdtGCounter:
    case MechanismKind::CrdtOrSet:
    case MechanismKind::AtomicCas:
      return n - 1;
    case MechanismKind::BrokenSubMajorityPaxos:
      return n - std::max(1, n / 2);
    default:
      return (n - 1) / 2;
  }
}

class InvalidPriorityTree : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Pre-assigned writer hierarchy: a parent outranks its descendants;
/// writers without an ancestor relation are siblings.
class PriorityTree {
 public:
  PriorityTree() = default;
  PriorityTree(int n, std::map<WriterId, WriterId> parent) : n_(n), parent_(std::move(parent)) {
    for (const auto& [child, par] : parent_) {
      if (child < 0 || child >= n || par < 0 || par >= n)
        throw InvalidPriorityTree("priority tree names a writer outside [0,n)");
      if (child == par) throw InvalidPriorityTree("writer is its own parent");
    }
    for (WriterId w = 0; w < n; ++w) {
      std::set<WriterId> seen{w};
      for (auto cur = parent_of(w); cur; cur = parent_of(*cur))
        if (!seen.insert(*cur).second) throw InvalidPriorityTree("priority tree has a cycle");
    }
    // Preorder rank: ancestors before descendants, sibling subtrees by lowest
    // writer id first.
    std::map<WriterId, std::vector<WriterId>> children;
    std::vector<WriterId> roots;
    for (WriterId w = 0; w < n; ++w) {
      if (auto p = parent_of(w)) children[*p].push_back(w);
      else roots.push_back(w);
    }
    rank_.assign(static_cast<std::size_t>(n), 0);
    int next = 0;
    auto visit = [&](auto&& self, WriterId w) -> void {
      rank_[static_cast<std::size_t>(w)] = next++;
      for (WriterId c : children[w]) self(self, c);
    };
    for (WriterId r : roots) visit(visit, r);
  }

  /// Flat tree: everybody a root, so siblings order by writer id.
  static PriorityTree flat(int n) { return PriorityTree(n, {}); }

  int size() const { return n_; }
  const std::map<WriterId, WriterId>& parents() const { return parent_; }

  std::optional<WriterId> parent_of(WriterId w) const {
    auto it = parent_.find(w);
    if (it == parent_.end()) return std::nullopt;
    return it->second;
  }

  bool is_ancestor(WriterId a, WriterId b) const {
    for (auto cur = parent_of(b); cur; cur = parent_of(*cur))
      if (*cur == a) return true;
    return false;
  }

  bool siblings(WriterId a, WriterId b) const {
    return a != b && !is_ancestor(a, b) && !is_ancestor(b, a);
  }

  /// Position in the total order used for local conflict resolution.
  int rank(WriterId w) const { return rank_.at(static_cast<std::size_t>(w)); }

 private:
  int n_ = 0;
  std::map<WriterId, WriterId> parent_;
  std::vector<int> rank_;
};

/// Tunables shared by all mechanisms; each reads the fields it needs.
struct MechanismParams {
  MechanismKind kind = MechanismKind::Paxos;
  ProjectionKind projection = ProjectionKind::LastWrite;
  /// Base of the randomized retry backoff [T, 2T] in ticks.
  Tick retry_base = 40;
  /// Promise/accept threshold for Paxos; 0 selects the kind's default.
  int quorum_threshold = 0;
  FastQuorumRounding fast_quorum = FastQuorumRounding::Floor;
  std::optional<PriorityTree> priority;
  /// CRDT gossip fan-out including the writer itself; 0 means n.
  int fanout = 0;
  /// Ticks a CRDT writer batches local updates before gossiping them.
  Tick gossip_delay = 1;
};

}  // namespace syncframe
