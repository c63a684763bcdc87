#include "isda/model_error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>

#include "isda/csv.hpp"
#include "isda/error.hpp"

namespace isda {

std::vector<double> DiscrepancySeries::series(Index k) const {
  std::vector<double> out;
  out.reserve(z.size());
  for (const auto& v : z) {
    if (k < 0 || k >= v.size()) {
      throw DimensionError("DiscrepancySeries: component out of range");
    }
    out.push_back(v[k]);
  }
  return out;
}

DiscrepancySeries extract_discrepancy(std::span<const Vector> x_traj,
                                      double delta, double F) {
  if (x_traj.size() < 2) {
    throw DimensionError("extract_discrepancy: need at least 2 snapshots");
  }
  if (!(delta > 0.0)) {
    throw DimensionError("extract_discrepancy: delta must be > 0");
  }
  DiscrepancySeries s;
  s.delta = delta;
  s.z.reserve(x_traj.size() - 1);
  for (std::size_t n = 0; n + 1 < x_traj.size(); ++n) {
    const Vector& x0 = x_traj[n];
    const Vector& x1 = x_traj[n + 1];
    if (x1.size() != x0.size()) {
      throw DimensionError("extract_discrepancy: snapshot sizes differ");
    }
    Vector z = (x1 - x0) / delta - reduced_rate(F, x0, delta);
    if (!z.allFinite()) {
      throw NumericalError("model_error",
                           "non-finite discrepancy at n = " +
                               std::to_string(n + 1));
    }
    s.z.push_back(std::move(z));
  }
  return s;
}

std::vector<double> autocorrelation(std::span<const double> series,
                                    std::size_t max_lag) {
  const std::size_t n = series.size();
  if (n <= max_lag) {
    throw DimensionError("autocorrelation: series shorter than max_lag + 1");
  }
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = series[i] - mean;
  double c0 = 0.0;
  for (double v : c) c0 += v * v;
  if (!(c0 > 0.0)) {
    throw NumericalError("model_error", "autocorrelation of a zero-variance series");
  }
  std::vector<double> acf(max_lag + 1);
  acf[0] = 1.0;
  for (std::size_t tau = 1; tau <= max_lag; ++tau) {
    double s = 0.0;
    for (std::size_t i = 0; i + tau < n; ++i) s += c[i] * c[i + tau];
    acf[tau] = s / c0;
  }
  return acf;
}

ArFit fit_ar(std::span<const double> series, int order_max) {
  const std::size_t n = series.size();
  if (order_max < 0 || n <= static_cast<std::size_t>(order_max) + 1) {
    throw DimensionError("fit_ar: series too short for order_max");
  }
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> cov(order_max + 1, 0.0);
  for (int lag = 0; lag <= order_max; ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) {
      s += (series[i] - mean) * (series[i + lag] - mean);
    }
    cov[lag] = s / static_cast<double>(n);
  }
  if (!(cov[0] > 0.0)) {
    throw NumericalError("model_error", "singular autocovariance (zero variance)");
  }

  const double dn = static_cast<double>(n);
  ArFit best;
  best.mean = mean;
  best.innovation_variance = cov[0];
  best.coefficients = Vector();
  best.aic.push_back(dn * std::log(cov[0]));
  double best_aic = best.aic[0];

  std::vector<double> phi;
  double sigma2 = cov[0];
  for (int p = 1; p <= order_max; ++p) {
    double num = cov[p];
    for (int i = 1; i < p; ++i) num -= phi[i - 1] * cov[p - i];
    const double k = num / sigma2;
    if (!(std::abs(k) < 1.0)) {
      throw NumericalError("model_error",
                           "singular autocovariance matrix at order " +
                               std::to_string(p));
    }
    std::vector<double> next(p);
    for (int i = 1; i < p; ++i) next[i - 1] = phi[i - 1] - k * phi[p - i - 1];
    next[p - 1] = k;
    phi = std::move(next);
    sigma2 *= 1.0 - k * k;
    const double aic = dn * std::log(sigma2) + 2.0 * p;
    best.aic.push_back(aic);
    if (aic < best_aic) {
      best_aic = aic;
      best.order = p;
      best.innovation_variance = sigma2;
      best.coefficients = Eigen::Map<const Vector>(phi.data(), p);
    }
  }
  return best;
}

NoisePipelineResult run_noise_pipeline(const NoisePipelineConfig& cfg) {
  cfg.model.validate();
  if (!(cfg.delta > 0.0)) throw DimensionError("delta must be > 0");
  if (cfg.component < 0 || cfg.component >= cfg.model.K) {
    throw DimensionError("component out of range");
  }
  // Integrator step: the largest divisor of delta not above eps/50.
  const double dt_max = std::min(cfg.delta, cfg.model.eps / 50.0);
  const auto stride = static_cast<std::size_t>(
      std::ceil(cfg.delta / dt_max * (1.0 - 1e-12)));
  const double dt = cfg.delta / static_cast<double>(stride);

  IntegrateOptions io;
  io.spinup = cfg.spinup;
  io.snapshot_every = stride;
  const FullState init =
      default_initial_state(cfg.model, RngStream(cfg.seed, 0));
  const Trajectory traj =
      integrate_full(cfg.model, init, dt, cfg.snapshots + 1, io);

  NoisePipelineResult res;
  res.dt = dt;
  res.series = extract_discrepancy(traj.x, cfg.delta, cfg.model.F);
  res.series.component = cfg.component;
  const std::vector<double> z = res.series.series(cfg.component);

  double mean = 0.0;
  double max_abs = 0.0;
  for (const auto& v : res.series.z) max_abs = std::max(max_abs, v.cwiseAbs().maxCoeff());
  for (double v : z) mean += v;
  mean /= static_cast<double>(z.size());
  double var = 0.0;
  for (double v : z) var += (v - mean) * (v - mean);
  var /= static_cast<double>(z.size());
  res.z_mean = mean;
  res.z_variance = var;
  res.max_abs_z = max_abs;

  // A decoupled run has z at round-off; its ACF is meaningless and may be
  // exactly degenerate, so it is only computed for a non-zero series.
  if (var > 0.0) {
    const std::size_t lag = std::min(cfg.max_lag, z.size() - 1);
    res.series.acf = autocorrelation(z, lag);
    const double band = 4.0 / std::sqrt(static_cast<double>(z.size()));
    for (std::size_t t = 1; t <= std::min<std::size_t>(50, lag); ++t) {
      if (std::abs(res.series.acf[t]) > band) ++res.lags_outside_band;
    }
    res.series.ar_fit = fit_ar(z, cfg.order_max);
  }
  return res;
}

void write_acf_csv(std::ostream& out, std::span<const double> acf) {
  CsvWriter csv(out);
  csv.header({"lag", "acf"});
  for (std::size_t t = 0; t < acf.size(); ++t) {
    csv.row({static_cast<double>(t), acf[t]});
  }
}

void write_discrepancy_csv(std::ostream& out, const DiscrepancySeries& s) {
  CsvWriter csv(out);
  const Index k = s.z.empty() ? 0 : s.z.front().size();
  std::vector<std::string> names{"n"};
  for (Index i = 0; i < k; ++i) names.push_back("z_" + std::to_string(i + 1));
  csv.header(names);
  std::vector<double> row(static_cast<std::size_t>(k) + 1);
  for (std::size_t n = 0; n < s.z.size(); ++n) {
    row[0] = static_cast<double>(n + 1);
    for (Index i = 0; i < k; ++i) row[static_cast<std::size_t>(i) + 1] = s.z[n][i];
    csv.row(row);
  }
}

}  // namespace isda
