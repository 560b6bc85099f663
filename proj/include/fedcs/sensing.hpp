#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fedcs/linalg.hpp"
#include "fedcs/rng.hpp"

namespace fedcs {

// Measurement operator. Generated instances have i.i.d. Gaussian(0, 1/M)
// entries with every column rescaled to unit l2 norm; instances wrapped from
// a loaded file keep their entries as-is.
struct SensingMatrix {
  Matrix entries;  // M x N, M < N

  int rows() const { return static_cast<int>(entries.rows()); }
  int cols() const { return static_cast<int>(entries.cols()); }
};

struct Sample {
  Vector x;  // length N, sparse ground truth
  Vector y;  // length M, y = A x
};

struct Dataset {
  std::vector<Sample> samples;
  int m = 0;
  int n = 0;

  int size() const { return static_cast<int>(samples.size()); }
};

// Disjoint cover of the dataset index set over K clients.
struct Partition {
  std::vector<std::vector<int>> client_indices;

  int clients() const { return static_cast<int>(client_indices.size()); }
};

enum class MagnitudeDist { kGaussian, kUniform, kRademacher };

inline SensingMatrix generate_sensing_matrix(int m, int n, std::uint64_t seed) {
  if (m <= 0 || n <= 0 || m >= n)
    throw std::invalid_argument("sensing matrix needs 0 < M < N, got M=" +
                                std::to_string(m) + " N=" + std::to_string(n));
  Rng rng(seed);
  Matrix a(m, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  // Entries are drawn in storage (column-major) order; replay tests rely on
  // this ordering.
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = scale * rng.gaussian();
  for (int j = 0; j < n; ++j) {
    const double norm = a.col(j).norm();
    if (norm == 0.0) throw std::runtime_error("sensing matrix column is zero");
    a.col(j) /= norm;
  }
  return SensingMatrix{std::move(a)};
}

inline SensingMatrix wrap_sensing_matrix(Matrix raw) {
  if (raw.rows() <= 0 || raw.cols() <= 0 || raw.rows() >= raw.cols())
    throw std::invalid_argument("loaded operator needs 0 < M < N");
  if (!raw.allFinite())
    throw std::invalid_argument("loaded operator has non-finite entries");
  return SensingMatrix{std::move(raw)};
}

// Bernoulli(p) support; magnitudes for active coordinates from `dist`.
// Draw order per coordinate: one support uniform, then (if active) the
// magnitude draw, before moving to the next coordinate.
inline Vector generate_sparse_vector(int n, double p, MagnitudeDist dist,
                                     std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("sparse vector length must be positive");
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("support probability must lie in (0,1)");
  Rng rng(seed);
  Vector x = Vector::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (!rng.bernoulli(p)) continue;
    switch (dist) {
      case MagnitudeDist::kGaussian:
        x[i] = rng.gaussian();
        break;
      case MagnitudeDist::kUniform:
        x[i] = 2.0 * rng.uniform01() - 1.0;
        break;
      case MagnitudeDist::kRademacher:
        x[i] = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        break;
    }
  }
  return x;
}

inline Vector measure(const SensingMatrix& a, const Vector& x) {
  if (x.size() != a.entries.cols())
    throw std::invalid_argument("measure: signal length does not match operator");
  return a.entries * x;
}

// Sample i uses the child stream derive_seed(seed, i), so datasets are
// reproducible and independent of how generation work is scheduled.
inline Dataset build_dataset(const SensingMatrix& a, int total, double p,
                             MagnitudeDist dist, std::uint64_t seed) {
  if (total < 1) throw std::invalid_argument("dataset size must be >= 1");
  Dataset ds;
  ds.m = a.rows();
  ds.n = a.cols();
  ds.samples.reserve(total);
  for (int i = 0; i < total; ++i) {
    Sample s;
    s.x = generate_sparse_vector(ds.n, p, dist, derive_seed(seed, i));
    s.y = measure(a, s.x);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Contiguous split; the remainder goes to the earliest clients. Explicit
// sizes (summing to the dataset size, each >= 1) override the equal split.
inline Partition partition_dataset(const Dataset& ds, int k,
                                   const std::vector<int>* sizes = nullptr) {
  const int total = ds.size();
  if (k < 1) throw std::invalid_argument("client count must be >= 1");
  if (k > total)
    throw std::invalid_argument("more clients than samples: K=" + std::to_string(k) +
                                " S=" + std::to_string(total));
  std::vector<int> counts;
  if (sizes) {
    if (static_cast<int>(sizes->size()) != k)
      throw std::invalid_argument("explicit sizes must list one entry per client");
    long long sum = 0;
    for (int s : *sizes) {
      if (s < 1) throw std::invalid_argument("every client needs at least one sample");
      sum += s;
    }
    if (sum != total)
      throw std::invalid_argument("explicit sizes must sum to the dataset size");
    counts = *sizes;
  } else {
    const int base = total / k;
    const int rem = total % k;
    counts.assign(k, base);
    for (int i = 0; i < rem; ++i) ++counts[i];
  }
  Partition part;
  part.client_indices.resize(k);
  int next = 0;
  for (int c = 0; c < k; ++c) {
    part.client_indices[c].resize(counts[c]);
    for (int j = 0; j < counts[c]; ++j) part.client_indices[c][j] = next++;
  }
  return part;
}

// Sample-count aggregation weights |S_k| / |S|.
inline std::vector<double> partition_weights(const Partition& part) {
  std::size_t total = 0;
  for (const auto& idx : part.client_indices) total += idx.size();
  std::vector<double> w;
  w.reserve(part.client_indices.size());
  for (const auto& idx : part.client_indices)
    w.push_back(static_cast<double>(idx.size()) / static_cast<double>(total));
  return w;
}

}  // namespace fedcs
