#include "isda/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace isda {

GaussianDensity::GaussianDensity(Vector mean, SymMatrix cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.dim() != mean_.size()) {
    throw DimensionError("GaussianDensity: mean and covariance sizes differ");
  }
  chol_ = cholesky_psd(cov_.matrix());
  log_det_ = isda::log_det(chol_);
}

GaussianDensity GaussianDensity::standard(Index m) {
  return GaussianDensity(Vector::Zero(m), SymMatrix::identity(m));
}

GaussianDensity GaussianDensity::isotropic(Vector mean, double variance) {
  const Index m = mean.size();
  return GaussianDensity(std::move(mean),
                         SymMatrix::diagonal(Vector::Constant(m, variance)));
}

Vector GaussianDensity::transform(const Vector& xi) const {
  if (xi.size() != dim()) {
    throw DimensionError("GaussianDensity::transform: dimension mismatch");
  }
  return mean_ + lower_times(chol_, xi);
}

Vector GaussianDensity::sample(RngStream& rng) const {
  return transform(rng.normal_vector(dim()));
}

double GaussianDensity::mahalanobis_sq(const Vector& x) const {
  if (x.size() != dim()) {
    throw DimensionError("GaussianDensity: dimension mismatch");
  }
  if (degenerate()) {
    throw NumericalError("gaussian",
                         "density of a degenerate Gaussian is undefined");
  }
  return forward_solve(chol_, x - mean_).squaredNorm();
}

Vector GaussianDensity::precision_times(const Vector& d) const {
  if (degenerate()) {
    throw NumericalError("gaussian",
                         "precision of a degenerate Gaussian is undefined");
  }
  return cholesky_solve(chol_, d);
}

double GaussianDensity::log_density(const Vector& x) const {
  const double m = static_cast<double>(dim());
  return -0.5 * mahalanobis_sq(x) - 0.5 * log_det_ -
         0.5 * m * std::log(2.0 * std::numbers::pi);
}

Vector sample_gaussian(const GaussianDensity& d, RngStream& rng) {
  return d.sample(rng);
}

double log_density(const GaussianDensity& d, const Vector& x) {
  return d.log_density(x);
}

}  // namespace isda
