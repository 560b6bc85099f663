#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "fedcs/rng.hpp"

using fedcs::Rng;

TEST_CASE("uniform01 replays the documented engine mapping") {
  std::mt19937_64 raw(42);
  Rng rng(42);
  for (int i = 0; i < 2000; ++i) {
    const double expect =
        static_cast<double>(raw() >> 11) * 0x1.0p-53;
    REQUIRE(rng.uniform01() == expect);
  }
}

TEST_CASE("uniform01 stays in [0,1) with sane moments") {
  Rng rng(7);
  double sum = 0.0, sum_sq = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  const double mean = sum / draws;
  const double var = sum_sq / draws - mean * mean;
  REQUIRE(mean == Catch::Approx(0.5).margin(0.01));
  REQUIRE(var == Catch::Approx(1.0 / 12.0).margin(0.01));
}

TEST_CASE("gaussian replays the Box-Muller cosine branch, two draws per call") {
  std::mt19937_64 raw(99);
  Rng rng(99);
  for (int i = 0; i < 2000; ++i) {
    const double u1 = static_cast<double>(raw() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(raw() >> 11) * 0x1.0p-53;
    const double expect = std::sqrt(-2.0 * std::log1p(-u1)) *
                          std::cos(2.0 * std::numbers::pi * u2);
    REQUIRE(rng.gaussian() == expect);
  }
}

TEST_CASE("gaussian moments") {
  Rng rng(1234);
  double sum = 0.0, sum_sq = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double g = rng.gaussian();
    REQUIRE(std::isfinite(g));
    sum += g;
    sum_sq += g * g;
  }
  const double mean = sum / draws;
  REQUIRE(mean == Catch::Approx(0.0).margin(0.02));
  REQUIRE(sum_sq / draws - mean * mean == Catch::Approx(1.0).margin(0.03));
}

TEST_CASE("bernoulli replays uniform01 < p") {
  Rng a(5), b(5);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    const bool expect = a.uniform01() < 0.3;
    const bool got = b.bernoulli(0.3);
    REQUIRE(got == expect);
    hits += got;
  }
  REQUIRE(hits > 2700);
  REQUIRE(hits < 3300);
}

TEST_CASE("uniform_below replays the multiply-shift mapping and stays in range") {
  std::mt19937_64 raw(77);
  Rng rng(77);
  for (int i = 0; i < 2000; ++i) {
    const std::uint64_t n = 1 + i % 97;
    const std::uint64_t expect = static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(raw()) * n) >> 64);
    const std::uint64_t got = rng.uniform_below(n);
    REQUIRE(got == expect);
    REQUIRE(got < n);
  }
}

TEST_CASE("uniform_below covers every residue for small n") {
  Rng rng(11);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 500; ++i) seen.insert(rng.uniform_below(7));
  REQUIRE(seen.size() == 7);
}

TEST_CASE("mix64 matches an independent SplitMix64 finalizer") {
  auto reference = [](std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  };
  for (std::uint64_t z : {0ULL, 1ULL, 42ULL, 0xDEADBEEFULL, ~0ULL})
    REQUIRE(fedcs::mix64(z) == reference(z));
}

TEST_CASE("derive_seed separates streams and is stable") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4096; ++s) seen.insert(fedcs::derive_seed(1, s));
  REQUIRE(seen.size() == 4096);

  REQUIRE(fedcs::derive_seed(1, 0) == fedcs::derive_seed(1, 0));
  REQUIRE(fedcs::derive_seed(1, 0) != fedcs::derive_seed(2, 0));
  REQUIRE(fedcs::derive_seed(1, 0) ==
          fedcs::mix64(1 + 0x9E3779B97F4A7C15ULL));
}

TEST_CASE("same seed gives the same stream, different seeds diverge") {
  Rng a(2024), b(2024), c(2025);
  bool diverged = false;
  for (int i = 0; i < 64; ++i) {
    const std::uint64_t va = a.next_u64();
    REQUIRE(va == b.next_u64());
    diverged = diverged || (va != c.next_u64());
  }
  REQUIRE(diverged);
}
