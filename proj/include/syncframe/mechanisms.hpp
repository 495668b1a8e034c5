#pragma once

#include "syncframe/harness.hpp"
#include "syncframe/mechanisms/atomic_cas.hpp"
#include "syncframe/mechanisms/common.hpp"
#include "syncframe/mechanisms/crdt.hpp"
#include "syncframe/mechanisms/epaxos.hpp"
#include "syncframe/mechanisms/paxos.hpp"
#include "syncframe/mechanisms/raft.hpp"
#include "syncframe/mechanisms/vr.hpp"

namespace syncframe {

/// Calls `f.template operator()<M>()` with the mechanism model of `kind`.
template <class F>
decltype(auto) with_mechanism(MechanismKind kind, F&& f) {
  switch (kind) {
    case MechanismKind::Paxos:
    case MechanismKind::BrokenSubMajorityPaxos:
      return f.template operator()<paxos::Mechanism>();
    case MechanismKind::Raft:
      return f.template operator()<raft::Mechanism>();
    case MechanismKind::VR:
      return f.template operator()<vr::Mechanism>();
    case MechanismKind::EPaxos:
    case MechanismKind::EPaxosPriority:
      return f.template operator()<epaxos::Mechanism>();
    case MechanismKind::CrdtGCounter:
    case MechanismKind::CrdtOrSet:
      return f.template operator()<crdt::Mechanism>();
    case MechanismKind::AtomicCas:
      return f.template operator()<atomic::Mechanism>();
  }
  throw std::invalid_argument("unknown mechanism");
}

/// Runs `workload` under the mechanism selected by `params.kind`.
inline RunResult run_mechanism(const SimConfig& cfg, const MechanismParams& params,
                               const Workload& workload) {
  return with_mechanism(params.kind, [&]<class M>() {
    return run_until_quiescent<M>(cfg, params, workload);
  });
}

inline MechanismParams default_params(MechanismKind kind) {
  MechanismParams p;
  p.kind = kind;
  if (kind == MechanismKind::CrdtGCounter) p.projection = ProjectionKind::Sum;
  if (kind == MechanismKind::CrdtOrSet) p.projection = ProjectionKind::SetUnion;
  return p;
}

}  // namespace syncframe
