#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace syncframe {

/// Portable seeded generator: the 64-bit linear congruential recurrence
///   x' = 6364136223846793005 * x + 1442695040888963407  (mod 2^64)
/// with x0 = seed. Each draw advances once and yields the high 32 bits.
/// Range reduction is a plain modulo so every implementation that follows
/// this recipe reproduces the same stream (standard distributions are not
/// portable across library vendors).
///
/// Test vectors, seed = 1, first three next32(): 0x6C576FAC, 0x826886B3,
/// 0xA5FAE199.
class Lcg64 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  static constexpr std::uint64_t kIncrement = 1442695040888963407ULL;

  explicit Lcg64(std::uint64_t seed) : engine_(seed) {}

  std::uint32_t next32() { return static_cast<std::uint32_t>(engine_() >> 32); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("empty range");
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next32() % span);
  }

  /// True with probability num/den.
  bool bernoulli(std::uint64_t num, std::uint64_t den) {
    if (den == 0) throw std::invalid_argument("zero denominator");
    if (num == 0) return false;
    if (num >= den) return true;
    return next32() % den < num;
  }

 private:
  // m = 0 selects modulus 2^64 for a 64-bit result type.
  std::linear_congruential_engine<std::uint64_t, kMultiplier, kIncrement, 0> engine_;
};

/// FNV-1a, 64-bit. Used for trace digests.
class Fnv1a64 {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace syncframe
