#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace fedcs {

// All randomness in the library flows through this wrapper instead of the
// <random> distributions, whose output sequences are implementation-defined.
// The engine is std::mt19937_64 (bit-exact per the standard) and every
// mapping below is spelled out, so a test can replay any stream draw by
// draw and results are identical for any worker count.
//
// Mappings, in terms of raw engine outputs r:
//   uniform01():  (r >> 11) * 2^-53, in [0, 1)
//   gaussian():   Box-Muller cosine branch, sqrt(-2 ln(1-u1)) cos(2 pi u2);
//                 consumes exactly two uniforms per call, no cached spare
//   bernoulli(p): uniform01() < p, one uniform per call
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double gaussian() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * kPi * u2);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Unbiased-enough index draw via 128-bit multiply-shift; used for shuffles.
  std::uint64_t uniform_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer, used to derive independent child seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Child seed for stream `stream` of a parent seed. Deriving per-sample and
// per-client streams this way keeps generation order-free: any subset can be
// produced on any thread with identical results.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

}  // namespace fedcs
