#pragma once

#include "isda/linalg.hpp"
#include "isda/rng.hpp"

namespace isda {

/// Multivariate normal N(mean, cov) with a cached semi-definite Cholesky
/// factor. Sampling works for degenerate covariances (zero columns in the
/// factor); evaluating the density of a degenerate Gaussian is an error.
class GaussianDensity {
 public:
  GaussianDensity() = default;
  GaussianDensity(Vector mean, SymMatrix cov);

  /// N(0, I_m), the reference density of implicit sampling.
  static GaussianDensity standard(Index m);
  /// N(mean, variance * I_m).
  static GaussianDensity isotropic(Vector mean, double variance);

  Index dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }
  const SymMatrix& cov() const noexcept { return cov_; }
  const Matrix& chol() const noexcept { return chol_.lower; }
  const CholeskyFactor& factor() const noexcept { return chol_; }
  double log_det() const noexcept { return log_det_; }
  bool degenerate() const noexcept { return !chol_.full_rank(); }

  /// mean + chol * xi, xi ~ N(0, I).
  Vector sample(RngStream& rng) const;
  /// Same map for a caller-supplied reference draw.
  Vector transform(const Vector& xi) const;

  /// (x - mean)^T cov^{-1} (x - mean) via a triangular solve.
  double mahalanobis_sq(const Vector& x) const;
  /// cov^{-1} d.
  Vector precision_times(const Vector& d) const;
  double log_density(const Vector& x) const;

 private:
  Vector mean_;
  SymMatrix cov_;
  CholeskyFactor chol_;
  double log_det_ = 0.0;
};

Vector sample_gaussian(const GaussianDensity& d, RngStream& rng);
double log_density(const GaussianDensity& d, const Vector& x);

}  // namespace isda
