#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedcs/linalg.hpp"

namespace fedcs {

// dB floors replacing the infinities of exact fits, so metric files stay
// numeric.
inline constexpr double kNmseFloorDb = -300.0;
inline constexpr double kPsnrCapDb = 300.0;

// 10 log10( mean ||x - xhat||^2 / mean ||x||^2 ), batches as columns. The
// expectation is the batch mean of numerator and denominator separately.
inline double nmse_db(const Matrix& x_true, const Matrix& x_hat) {
  if (x_true.rows() != x_hat.rows() || x_true.cols() != x_hat.cols())
    throw std::invalid_argument("nmse_db: shape mismatch");
  if (x_true.size() == 0) throw std::invalid_argument("nmse_db: empty batch");
  const double den = x_true.squaredNorm();
  if (den == 0.0)
    throw std::invalid_argument("nmse_db: all-zero ground truth");
  const double num = (x_true - x_hat).squaredNorm();
  if (num == 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(num / den));
}

inline double psnr(const Matrix& img_true, const Matrix& img_hat, double peak) {
  if (img_true.rows() != img_hat.rows() || img_true.cols() != img_hat.cols())
    throw std::invalid_argument("psnr: shape mismatch");
  if (img_true.size() == 0) throw std::invalid_argument("psnr: empty image");
  if (peak <= 0.0) throw std::invalid_argument("psnr: peak must be positive");
  const double mse =
      (img_true - img_hat).squaredNorm() / static_cast<double>(img_true.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

}  // namespace fedcs
