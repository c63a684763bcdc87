#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "isda/linalg.hpp"
#include "isda/lorenz96.hpp"

namespace isda {

struct ArFit {
  int order = 0;
  Vector coefficients;  // phi_1..phi_p of z_n = sum_i phi_i z_{n-i} + e_n
  double innovation_variance = 0.0;
  double mean = 0.0;
  std::vector<double> aic;  // N log sigma_p^2 + 2p for p = 0..order_max
};

struct DiscrepancySeries {
  double delta = 0.0;
  std::vector<Vector> z;     // z^1..z^N
  std::vector<double> acf;   // of `component`
  Index component = 0;
  std::optional<ArFit> ar_fit;

  std::vector<double> series(Index k) const;
};

/// z^{n+1} = (x^{n+1} - x^n)/delta - R_delta(x^n) with the reduced model at
/// forcing F. Needs at least two snapshots.
DiscrepancySeries extract_discrepancy(std::span<const Vector> x_traj,
                                      double delta, double F);

/// Biased estimator acf(tau) = sum (z_n - m)(z_{n+tau} - m) / sum (z_n - m)^2.
std::vector<double> autocorrelation(std::span<const double> series,
                                    std::size_t max_lag);

/// Yule-Walker fits of orders 0..order_max by Levinson-Durbin; the
/// returned model has the smallest AIC.
ArFit fit_ar(std::span<const double> series, int order_max);

struct NoisePipelineConfig {
  Lorenz96TwoScale model;
  double delta = 0.01;
  std::size_t snapshots = 100000;
  double spinup = 10.0;
  std::size_t max_lag = 200;
  int order_max = 20;
  Index component = 0;
  std::uint64_t seed = 1;
};

struct NoisePipelineResult {
  DiscrepancySeries series;
  double dt = 0.0;
  double z_mean = 0.0;
  double z_variance = 0.0;
  double max_abs_z = 0.0;
  std::size_t lags_outside_band = 0;  // among lags 1..50, band 4/sqrt(N)
};

NoisePipelineResult run_noise_pipeline(const NoisePipelineConfig& config);

/// `lag,acf`.
void write_acf_csv(std::ostream& out, std::span<const double> acf);
/// `n,z_1..z_K`.
void write_discrepancy_csv(std::ostream& out, const DiscrepancySeries& s);

}  // namespace isda
