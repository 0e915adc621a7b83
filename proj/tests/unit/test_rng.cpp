#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "tcssl/rng.hpp"

using tcssl::Rng;

TEST_SUITE("rng") {

TEST_CASE("engine matches the standard-pinned mt19937_64 sequence") {
  // The C++ standard fixes the 10000th output of a default-seeded (5489)
  // mt19937_64; this anchors every derived value below to something outside
  // this codebase.
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("uniform01 is the documented transform of the raw stream") {
  Rng draws(321), raw(321);
  for (int i = 0; i < 1000; ++i) {
    double expect = static_cast<double>(raw.next_u64() >> 11) * 0x1.0p-53;
    CHECK(draws.uniform01() == expect);
  }
}

TEST_CASE("uniform01 stays in [0, 1)") {
  Rng rng(9);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform maps to [lo, hi)") {
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform(-2.0, 3.0);
    CHECK(u >= -2.0);
    CHECK(u < 3.0);
  }
}

TEST_CASE("uniform_int is in range and unbiased across a small modulus") {
  Rng rng(11);
  std::vector<int> counts(7, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    std::int64_t v = rng.uniform_int(7);
    REQUIRE(v >= 0);
    REQUIRE(v < 7);
    counts[static_cast<std::size_t>(v)]++;
  }
  // Each bucket expects 10000 with sd ~ sqrt(10000*(6/7)) ~ 93; allow 5 sd.
  for (int c : counts) CHECK(std::abs(c - 10000) < 465);
}

TEST_CASE("uniform_int matches rejection sampling applied to the raw stream") {
  Rng draws(77), raw(77);
  const std::int64_t n = 12;
  for (int i = 0; i < 500; ++i) {
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % static_cast<std::uint64_t>(n);
    std::uint64_t r = raw.next_u64();
    while (r >= bound) r = raw.next_u64();
    CHECK(draws.uniform_int(n) == static_cast<std::int64_t>(r % static_cast<std::uint64_t>(n)));
  }
}

TEST_CASE("normal matches Box-Muller applied to the raw stream") {
  Rng draws(13), raw(13);
  for (int i = 0; i < 500; ++i) {
    double u1 = static_cast<double>(raw.next_u64() >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(raw.next_u64() >> 11) * 0x1.0p-53;
    while (u1 <= 0.0) u1 = static_cast<double>(raw.next_u64() >> 11) * 0x1.0p-53;
    double expect = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    CHECK(draws.normal() == expect);
  }
}

TEST_CASE("normal has mean 0 and unit variance at large samples") {
  Rng rng(14);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("bernoulli hits its extremes and its rate") {
  Rng rng(15);
  for (int i = 0; i < 100; ++i) CHECK_FALSE(rng.bernoulli(0.0));
  for (int i = 0; i < 100; ++i) CHECK(rng.bernoulli(1.0));
  int hits = 0;
  for (int i = 0; i < 100000; ++i) hits += rng.bernoulli(0.3) ? 1 : 0;
  CHECK(std::abs(hits - 30000) < 700);  // ~5 sd
}

TEST_CASE("state round-trips through its text form") {
  Rng rng(16);
  for (int i = 0; i < 37; ++i) rng.next_u64();
  std::string saved = rng.state();
  std::vector<std::uint64_t> expect;
  for (int i = 0; i < 20; ++i) expect.push_back(rng.next_u64());

  Rng other(999);
  other.set_state(saved);
  for (std::uint64_t e : expect) CHECK(other.next_u64() == e);
}

TEST_CASE("derive gives identical streams for identical salts") {
  Rng a = Rng::derive(42, 7, 3);
  Rng b = Rng::derive(42, 7, 3);
  for (int i = 0; i < 50; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derive separates streams by any component") {
  std::uint64_t base = Rng::derive_seed(42, 7, 3);
  CHECK(base != Rng::derive_seed(43, 7, 3));
  CHECK(base != Rng::derive_seed(42, 8, 3));
  CHECK(base != Rng::derive_seed(42, 7, 4));
  // Salt order matters: (a, b) and (b, a) are distinct purposes.
  CHECK(Rng::derive_seed(42, 7, 3) != Rng::derive_seed(42, 3, 7));
}

TEST_CASE("derived seeds show no collisions over a consecutive block") {
  std::vector<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 4096; ++i) seen.push_back(Rng::derive_seed(0, i));
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("frozen draws guard the distribution implementations") {
  // Regression pins generated once from this implementation; the algorithmic
  // cross-checks above justify them, these catch accidental edits.
  Rng rng(2024);
  CHECK(rng.uniform01() == doctest::Approx(0.612684545263525).epsilon(1e-15));
  CHECK(rng.uniform_int(1000) == 969);
  CHECK(rng.normal() == doctest::Approx(-0.82263406378140991).epsilon(1e-12));
}

}  // TEST_SUITE
