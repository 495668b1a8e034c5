#pragma once

// Fault-tolerance limit predicates and the brute-force enumerations that
// cross-check them.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "syncframe/core_model.hpp"

namespace syncframe {

class NonIntersecting : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_n(int n) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
}

inline void require_nqf(int n, int q, int f) {
  require_n(n);
  if (q < 1 || q > n) throw std::invalid_argument("quorum size out of [1, n]");
  if (f < 0 || f >= n) throw std::invalid_argument("fault count out of [0, n)");
}

/// Largest f such that a majority of survivors still exists.
inline int lemma1_max_faults(int n) {
  require_n(n);
  return (n - 1) / 2;
}

/// Dynamic-arbiter bound: 2(n - q) + f - 2 < n.
inline bool dynamic_limit_safe(int n, int q, int f) {
  require_nqf(n, q, f);
  return 2 * (n - q) + f - 2 < n;
}

/// Static-arbiter bound: (n - q) + f <= ceil((n - 1) / 2).
inline bool static_limit_safe(int n, int q, int f) {
  require_nqf(n, q, f);
  return (n - q) + f <= n / 2;
}

/// ROLL form of the dynamic bound with F = n - q: 2F + f - 1 <= n.
inline bool roll_safe(int n, int q, int f) {
  require_nqf(n, q, f);
  const int F = n - q;
  return 2 * F + f - 1 <= n;
}

/// Largest f that keeps the static bound, capped by the survivor-majority
/// limit; -1 when no f is safe.
inline int static_fault_bound(int n, int q) {
  int best = -1;
  for (int f = 0; f < n; ++f)
    if (static_limit_safe(n, q, f)) best = f;
  return std::min(best, lemma1_max_faults(n));
}

inline int dynamic_fault_bound(int n, int q) {
  int best = -1;
  for (int f = 0; f < n; ++f)
    if (dynamic_limit_safe(n, q, f)) best = f;
  return best;
}

namespace detail {

inline std::vector<std::uint32_t> subsets_of_size(int n, int k) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t m = 0; m < (1u << n); ++m)
    if (std::popcount(m) == k) out.push_back(m);
  return out;
}

inline std::string mask_to_string(std::uint32_t m) {
  std::string s = "{";
  bool first = true;
  for (int i = 0; i < 32; ++i)
    if (m & (1u << i)) {
      s += (first ? "" : ",") + std::to_string(i);
      first = false;
    }
  return s + "}";
}

}  // namespace detail

inline constexpr int kMaxEnumerationN = 12;

/// Over all pairs of size-q quorums, the most writers outside their
/// intersection. Requires 2q >= n; below that quorums can be disjoint.
inline int max_uncovered(int n, int q) {
  require_n(n);
  if (n > kMaxEnumerationN) throw std::invalid_argument("enumeration bound exceeded");
  if (q < 1 || q > n) throw std::invalid_argument("quorum size out of [1, n]");
  if (2 * q < n) throw NonIntersecting("quorums of size " + std::to_string(q) + " in " + std::to_string(n) + " need not intersect");
  const std::uint32_t all = (1u << n) - 1;
  auto qs = detail::subsets_of_size(n, q);
  int best = 0;
  for (auto a : qs)
    for (auto b : qs) best = std::max(best, std::popcount(all & ~(a & b)));
  return best;
}

struct SplitBrainWitness {
  std::set<WriterId> a;
  std::set<WriterId> b;
  std::string to_string() const {
    auto show = [](const std::set<WriterId>& s) {
      std::string o = "{";
      for (auto it = s.begin(); it != s.end(); ++it) o += (it == s.begin() ? "" : ",") + std::to_string(*it);
      return o + "}";
    };
    return show(a) + " " + show(b);
  }
};

/// Whether two disjoint groups can each reach `threshold` acceptors; the
/// first such pair in mask order is the witness.
inline std::optional<SplitBrainWitness> split_brain_possible(int n, int threshold) {
  require_n(n);
  if (n > kMaxEnumerationN) throw std::invalid_argument("enumeration bound exceeded");
  if (threshold < 1 || threshold > n) throw std::invalid_argument("threshold out of [1, n]");
  const std::uint32_t all = (1u << n) - 1;
  for (std::uint32_t a = 1; a <= all; ++a) {
    if (std::popcount(a) < threshold) continue;
    for (std::uint32_t b = 1; b <= all; ++b) {
      if ((b & a) || std::popcount(b) < threshold) continue;
      SplitBrainWitness w;
      for (int i = 0; i < n; ++i) {
        if (a & (1u << i)) w.a.insert(i);
        if (b & (1u << i)) w.b.insert(i);
      }
      return w;
    }
  }
  return std::nullopt;
}

/// Worst case of the static bound by enumeration: the largest set of writers
/// that are outside a quorum or faulty.
inline std::pair<int, std::string> static_worst_case(int n, int q, int f) {
  require_nqf(n, q, f);
  const std::uint32_t all = (1u << n) - 1;
  int best = -1;
  std::string witness;
  for (auto quorum : detail::subsets_of_size(n, q))
    for (auto faulty : detail::subsets_of_size(n, f)) {
      int bad = std::popcount((all & ~quorum) | faulty);
      if (bad > best) {
        best = bad;
        witness = "Q=" + detail::mask_to_string(quorum) + " F=" + detail::mask_to_string(faulty);
      }
    }
  return {best, witness};
}

/// `n|q|f|formula|oracle|witness`
struct LimitReport {
  std::string check;
  int n = 0, q = 0, f = 0;
  bool formula_safe = false;
  bool oracle_safe = false;
  std::string witness = "-";

  bool agrees() const { return formula_safe == oracle_safe; }
  std::string to_line() const {
    auto b = [](bool v) { return v ? std::string("safe") : std::string("unsafe"); };
    return std::to_string(n) + "|" + std::to_string(q) + "|" + std::to_string(f) + "|" + b(formula_safe) +
           "|" + b(oracle_safe) + "|" + witness;
  }
};

struct LimitSweep {
  std::vector<LimitReport> reports;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Dynamic bound against the ROLL form for every (n, q, f), n <= n_max.
inline LimitSweep roll_equivalence(int n_max) {
  if (n_max < 2) throw std::invalid_argument("n_max must be at least 2");
  LimitSweep out;
  for (int n = 2; n <= n_max; ++n)
    for (int q = 1; q <= n; ++q)
      for (int f = 0; f < n; ++f) {
        LimitReport r{"roll", n, q, f, dynamic_limit_safe(n, q, f), roll_safe(n, q, f), "-"};
        if (!r.agrees()) {
          r.witness = "2(n-q)+f-2=" + std::to_string(2 * (n - q) + f - 2) +
                      " 2F+f-1=" + std::to_string(2 * (n - q) + f - 1);
          out.failures.push_back("roll disagrees at " + r.to_line());
        }
        out.reports.push_back(r);
      }
  return out;
}

/// Static bound against exhaustive quorum/fault placement.
inline LimitSweep static_sweep(int n_max) {
  LimitSweep out;
  for (int n = 1; n <= n_max; ++n) {
    const int limit = n / 2;
    for (int q = 1; q <= n; ++q)
      for (int f = 0; f < n; ++f) {
        auto [worst, witness] = static_worst_case(n, q, f);
        LimitReport r{"static", n, q, f, static_limit_safe(n, q, f), worst <= limit, "-"};
        if (!r.agrees()) {
          r.witness = witness;
          out.failures.push_back("static disagrees at " + r.to_line());
        }
        out.reports.push_back(r);
      }
  }
  return out;
}

/// Enumerated max_uncovered against min(n, 2(n - q)); split-brain
/// enumeration against the majority threshold.
inline LimitSweep quorum_sweep(int n_max) {
  LimitSweep out;
  for (int n = 1; n <= n_max; ++n)
    for (int q = 1; q <= n; ++q) {
      if (2 * q >= n) {
        int got = max_uncovered(n, q);
        int want = std::min(n, 2 * (n - q));
        if (got != want)
          out.failures.push_back("max_uncovered(" + std::to_string(n) + "," + std::to_string(q) +
                                 ")=" + std::to_string(got) + " expected " + std::to_string(want));
      }
      auto sb = split_brain_possible(n, q);
      bool want = q <= n / 2;
      if (sb.has_value() != want)
        out.failures.push_back("split_brain_possible(" + std::to_string(n) + "," + std::to_string(q) +
                               ") = " + (sb ? "true" : "false"));
    }
  return out;
}

/// Safety must not be lost by enlarging quorums or by tolerating fewer
/// faults; the capped static bound never exceeds the survivor-majority limit.
inline LimitSweep monotonicity_sweep(int n_max) {
  LimitSweep out;
  for (int n = 1; n <= n_max; ++n) {
    for (int q = 1; q <= n; ++q)
      for (int f = 0; f < n; ++f) {
        for (auto [name, pred] : {std::pair{"dynamic", &dynamic_limit_safe},
                                  std::pair{"static", &static_limit_safe}}) {
          if (!pred(n, q, f)) continue;
          if (q < n && !pred(n, q + 1, f))
            out.failures.push_back(std::string(name) + " not monotone in q at n=" + std::to_string(n) +
                                   " q=" + std::to_string(q) + " f=" + std::to_string(f));
          if (f > 0 && !pred(n, q, f - 1))
            out.failures.push_back(std::string(name) + " not monotone in f at n=" + std::to_string(n) +
                                   " q=" + std::to_string(q) + " f=" + std::to_string(f));
        }
      }
    for (int q = 1; q <= n; ++q)
      if (static_fault_bound(n, q) > lemma1_max_faults(n))
        out.failures.push_back("static bound exceeds cap at n=" + std::to_string(n) + " q=" + std::to_string(q));
  }
  return out;
}

}  // namespace syncframe
