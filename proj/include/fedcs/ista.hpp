#pragma once

#include <stdexcept>
#include <vector>

#include "fedcs/sensing.hpp"

namespace fedcs {

struct IstaConfig {
  double lambda = 0.1;  // l1 weight
  double step = 0.0;    // 0 = derive 0.9 / sigma_max^2(A)
  int iters = 10;
};

// Elementwise shrinkage [|v_i| - theta]_+ sign(v_i), the prox of theta*l1.
inline double soft_threshold_scalar(double v, double theta) {
  if (v > theta) return v - theta;
  if (v < -theta) return v + theta;
  return 0.0;
}

inline Vector soft_threshold(const Vector& v, double theta) {
  if (theta < 0.0) throw std::invalid_argument("soft threshold must be >= 0");
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    out[i] = soft_threshold_scalar(v[i], theta);
  return out;
}

inline void soft_threshold_in_place(Matrix& z, double theta) {
  if (theta < 0.0) throw std::invalid_argument("soft threshold must be >= 0");
  double* p = z.data();
  for (Eigen::Index i = 0; i < z.size(); ++i) p[i] = soft_threshold_scalar(p[i], theta);
}

inline double default_step(const SensingMatrix& a) {
  const double s = spectral_norm_sq(a.entries);
  if (s <= 0.0) throw std::invalid_argument("operator has zero spectral norm");
  return 0.9 / s;
}

// Per-instance l1 weight heuristic, 0.1 * ||A^T y||_inf.
inline double default_lambda(const SensingMatrix& a, const Vector& y) {
  return 0.1 * (a.entries.transpose() * y).cwiseAbs().maxCoeff();
}

// Objective of the l1-regularized least-squares program,
//   (1/2) ||y - A x||^2 + lambda ||x||_1.
// The 1/2 makes ista_step an exact proximal-gradient step on this function
// with stepsize t, so it is non-increasing whenever t <= 1/sigma_max(A)^2.
inline double p1_objective(const SensingMatrix& a, const Vector& y,
                           const Vector& x, double lambda) {
  return 0.5 * (y - a.entries * x).squaredNorm() + lambda * x.lpNorm<1>();
}

// One proximal-gradient step, x <- shrink_{lambda t}[x + t A^T (y - A x)].
inline Vector ista_step(const SensingMatrix& a, const Vector& y,
                        const Vector& x_curr, double lambda, double t) {
  if (y.size() != a.entries.rows() || x_curr.size() != a.entries.cols())
    throw std::invalid_argument("ista_step: dimension mismatch");
  Vector v = x_curr + t * (a.entries.transpose() * (y - a.entries * x_curr));
  return soft_threshold(v, lambda * t);
}

struct IstaResult {
  Vector x_hat;
  std::vector<Vector> iterates;  // estimate after each iteration, 1..iters
};

// Runs config.iters steps from x = 0, keeping every intermediate estimate so
// iteration-i error can be compared against layer-i network error.
inline IstaResult ista_solve(const SensingMatrix& a, const Vector& y,
                             const IstaConfig& config) {
  if (config.iters < 1) throw std::invalid_argument("iteration count must be >= 1");
  const double t = config.step > 0.0 ? config.step : default_step(a);
  if (config.lambda < 0.0) throw std::invalid_argument("lambda must be >= 0");
  IstaResult res;
  res.iterates.reserve(config.iters);
  Vector x = Vector::Zero(a.cols());
  for (int it = 0; it < config.iters; ++it) {
    x = ista_step(a, y, x, config.lambda, t);
    res.iterates.push_back(x);
  }
  res.x_hat = std::move(x);
  return res;
}

}  // namespace fedcs
