#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>

namespace fedcs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Largest squared singular value of a, estimated by power iteration on a^T a.
// The start vector is deterministic (all-ones) so the estimate needs no seed.
inline double spectral_norm_sq(const Matrix& a, int iters = 100) {
  const Eigen::Index n = a.cols();
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  Vector w(n);
  for (int it = 0; it < iters; ++it) {
    w.noalias() = a.transpose() * (a * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
  }
  return (a * v).squaredNorm();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// FNV-1a over the raw bytes of a double sequence; used for cheap bit-identity
// checks on parameter sets.
inline std::uint64_t hash_doubles(std::uint64_t h, const double* data,
                                  std::size_t count) {
  const unsigned char* bytes = reinterpret_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < count * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;

}  // namespace fedcs
