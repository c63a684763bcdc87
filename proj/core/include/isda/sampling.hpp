#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "isda/linalg.hpp"
#include "isda/rng.hpp"

namespace isda {

/// log(sum exp(v)), stable for large negative entries. Returns -inf when
/// every entry is -inf.
double logsumexp(const Vector& v);

/// Samples with unnormalized log-weights and their normalized weights,
/// exp(log_w - logsumexp(log_w)). Constructing an ensemble whose weights are
/// all zero throws NumericalError.
class WeightedEnsemble {
 public:
  WeightedEnsemble() = default;
  WeightedEnsemble(std::vector<Vector> samples, Vector log_weights);
  static WeightedEnsemble uniform(std::vector<Vector> samples);

  std::size_t size() const noexcept { return samples_.size(); }
  Index dim() const noexcept {
    return samples_.empty() ? 0 : samples_.front().size();
  }
  bool empty() const noexcept { return samples_.empty(); }

  const std::vector<Vector>& samples() const noexcept { return samples_; }
  const Vector& sample(std::size_t i) const { return samples_.at(i); }
  const Vector& log_weights() const noexcept { return log_weights_; }
  const Vector& normalized_weights() const noexcept { return weights_; }
  /// Normalized log-weights, log_w - logsumexp(log_w).
  Vector normalized_log_weights() const;

  /// Adds per-sample log-weight increments and renormalizes.
  void reweight(const Vector& increments);
  /// Replaces samples (same count), keeping the weights.
  void replace_samples(std::vector<Vector> samples);

  Vector mean() const;
  Matrix covariance() const;

 private:
  void normalize();

  std::vector<Vector> samples_;
  Vector log_weights_;
  Vector weights_;
  double log_norm_ = 0.0;
};

/// Self-normalized estimate sum_i w_i g(X_i).
double importance_estimate(const std::function<double(const Vector&)>& g,
                           const WeightedEnsemble& ensemble);

struct EssReport {
  std::size_t M = 0;
  double r_hat = 1.0;   // M * sum w_i^2 for normalized w
  double m_eff = 0.0;   // M / r_hat
};

EssReport ess(const WeightedEnsemble& ensemble);
/// Same report from raw (unnormalized) log-weights.
EssReport ess_from_log_weights(const Vector& log_weights);

/// Closed-form E[w^2]/E[w]^2 for target N(0, I_m) and importance function
/// N(0, sigma^2 I_m): (sigma^2 / sqrt(2 sigma^2 - 1))^m.
double gaussian_weight_ratio(int m, double sigma);

struct ScalingRow {
  int m = 0;
  double required_M = 0.0;
};

/// Samples needed for a target effective count when N(0, sigma^2 I_m) is
/// used to sample N(0, I_m). Throws DimensionError unless 2 sigma^2 > 1.
std::vector<ScalingRow> gaussian_scaling_study(std::span<const int> m_list,
                                               double sigma,
                                               double m_eff_target);

/// Writes the `m,required_M` table.
void write_scaling_csv(std::ostream& out, std::span<const ScalingRow> rows);

/// Draws M samples from N(0, sigma^2 I_m), weights them against N(0, I_m)
/// and returns the empirical R_hat. Sample i uses rng.substream(i).
double empirical_weight_ratio(int m, double sigma, std::size_t M,
                              const RngStream& rng, unsigned threads = 1);

/// One-dimensional density, assumed normalized.
using Density1d = std::function<double(double)>;

struct OdeMapOptions {
  double tolerance = 1e-8;
  long max_steps = 1'000'000;
  double clip = 8.0;  // |xi| is clipped to this value
};

struct TransportPoint {
  double x = 0.0;
  double jacobian = 1.0;  // dx/dxi = g(xi) / f(x)
};

/// Integrates du/dt = g(t) / f(u), u(0) = 0 over [0, xi] with step-doubling
/// RK4 and returns x = u(xi). Both densities must have their mode at 0.
TransportPoint ode_transport_map_1d(const Density1d& f, const Density1d& g,
                                    double xi,
                                    const OdeMapOptions& options = {});

}  // namespace isda
