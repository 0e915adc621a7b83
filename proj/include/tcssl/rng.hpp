#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace tcssl {

// Seeded random stream with explicitly coded distributions.
//
// std::mt19937_64 output is pinned by the standard, but the standard
// *distributions* are not; frozen test values and byte-reproducible corpora
// require the full draw sequence to be ours. Streams for independent purposes
// (per video, per batch) are derived from (seed, salt...) so generation order
// never matters.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static std::uint64_t mix(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt_a,
                                   std::uint64_t salt_b = 0) {
    return mix(mix(mix(seed) ^ salt_a) ^ salt_b);
  }

  static Rng derive(std::uint64_t seed, std::uint64_t salt_a, std::uint64_t salt_b = 0) {
    return Rng(derive_seed(seed, salt_a, salt_b));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (one draw per call, no cached spare).
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::int64_t uniform_int(std::int64_t n) {
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t r = next_u64();
    while (r >= bound) r = next_u64();
    return static_cast<std::int64_t>(r % un);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tcssl
