#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>
#include <utility>

namespace ctsynth {

/// SplitMix64 finalizer. Full avalanche: one flipped input bit flips each
/// output bit with probability ~1/2.
constexpr uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based generator (SplitMix64 stream). Every variate is produced by
/// explicit bit arithmetic so streams are identical across standard libraries;
/// std::*_distribution is deliberately not used.
class Rng {
 public:
  using result_type = uint64_t;

  constexpr explicit Rng(uint64_t state = 0) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<uint64_t>::max(); }

  constexpr uint64_t operator()() { return next(); }

  constexpr uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi].
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Multiply-shift with rejection, unbiased.
  uint64_t below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
      if (static_cast<uint64_t>(m) >= limit) return static_cast<uint64_t>(m >> 64);
    }
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Two independent standard normals (Box-Muller).
  std::pair<double, double> normal_pair() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(t), r * std::sin(t)};
  }

  double normal() { return normal_pair().first; }

  /// Child stream keyed by `key`; the parent state is not advanced.
  Rng fork(uint64_t key) const { return Rng(mix64(state_ ^ mix64(key + 0x632BE59BD9B4E019ULL))); }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

/// Stream for (master seed, stream id, record index).
inline Rng derive_rng(uint64_t master_seed, std::string_view stream_id, uint64_t index) {
  const uint64_t keyed = mix64(master_seed ^ mix64(fnv1a64(stream_id)));
  return Rng(mix64(keyed ^ mix64(index + 0xD1B54A32D192ED03ULL)));
}

}  // namespace ctsynth
