#include "isda/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "isda/csv.hpp"
#include "isda/error.hpp"
#include "isda/parallel.hpp"

namespace isda {

double logsumexp(const Vector& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

WeightedEnsemble::WeightedEnsemble(std::vector<Vector> samples,
                                   Vector log_weights)
    : samples_(std::move(samples)), log_weights_(std::move(log_weights)) {
  if (static_cast<Index>(samples_.size()) != log_weights_.size()) {
    throw DimensionError("WeightedEnsemble: sample and weight counts differ");
  }
  for (const auto& s : samples_) {
    if (s.size() != samples_.front().size()) {
      throw DimensionError("WeightedEnsemble: samples of unequal length");
    }
  }
  normalize();
}

WeightedEnsemble WeightedEnsemble::uniform(std::vector<Vector> samples) {
  const auto n = static_cast<Index>(samples.size());
  return WeightedEnsemble(std::move(samples), Vector::Zero(n));
}

void WeightedEnsemble::normalize() {
  if (samples_.empty()) {
    weights_.resize(0);
    log_norm_ = 0.0;
    return;
  }
  log_norm_ = logsumexp(log_weights_);
  if (!std::isfinite(log_norm_)) {
    throw NumericalError("ensemble",
                         log_norm_ < 0 ? "all weights are zero"
                                       : "non-finite log-weight");
  }
  weights_ = (log_weights_.array() - log_norm_).exp().matrix();
}

Vector WeightedEnsemble::normalized_log_weights() const {
  return (log_weights_.array() - log_norm_).matrix();
}

void WeightedEnsemble::reweight(const Vector& increments) {
  if (increments.size() != log_weights_.size()) {
    throw DimensionError("WeightedEnsemble::reweight: size mismatch");
  }
  // Keep log-weights anchored near zero so long runs do not drift.
  log_weights_ = normalized_log_weights() + increments;
  normalize();
}

void WeightedEnsemble::replace_samples(std::vector<Vector> samples) {
  if (samples.size() != samples_.size()) {
    throw DimensionError("WeightedEnsemble::replace_samples: count mismatch");
  }
  samples_ = std::move(samples);
}

Vector WeightedEnsemble::mean() const {
  Vector mu = Vector::Zero(dim());
  for (std::size_t i = 0; i < size(); ++i) {
    mu += weights_[static_cast<Index>(i)] * samples_[i];
  }
  return mu;
}

Matrix WeightedEnsemble::covariance() const {
  const Vector mu = mean();
  Matrix c = Matrix::Zero(dim(), dim());
  for (std::size_t i = 0; i < size(); ++i) {
    const Vector d = samples_[i] - mu;
    c.noalias() += weights_[static_cast<Index>(i)] * d * d.transpose();
  }
  return c;
}

double importance_estimate(const std::function<double(const Vector&)>& g,
                           const WeightedEnsemble& ensemble) {
  if (ensemble.empty()) {
    throw DimensionError("importance_estimate: empty ensemble");
  }
  double acc = 0.0;
  const Vector& w = ensemble.normalized_weights();
  for (std::size_t i = 0; i < ensemble.size(); ++i) {
    acc += w[static_cast<Index>(i)] * g(ensemble.sample(i));
  }
  return acc;
}

EssReport ess_from_log_weights(const Vector& log_weights) {
  if (log_weights.size() == 0) throw DimensionError("ess: empty ensemble");
  const double norm = logsumexp(log_weights);
  if (!std::isfinite(norm)) {
    throw NumericalError("ensemble", "all weights are zero");
  }
  const double sum_sq = (2.0 * (log_weights.array() - norm)).exp().sum();
  EssReport r;
  r.M = static_cast<std::size_t>(log_weights.size());
  r.r_hat = static_cast<double>(r.M) * sum_sq;
  r.m_eff = static_cast<double>(r.M) / r.r_hat;
  return r;
}

EssReport ess(const WeightedEnsemble& ensemble) {
  if (ensemble.empty()) throw DimensionError("ess: empty ensemble");
  return ess_from_log_weights(ensemble.log_weights());
}

namespace {

void require_finite_weight_variance(double sigma) {
  if (!(2.0 * sigma * sigma > 1.0)) {
    std::ostringstream msg;
    msg << "sigma = " << sigma
        << ": weight variance is infinite unless 2 sigma^2 > 1";
    throw DimensionError(msg.str());
  }
}

}  // namespace

double gaussian_weight_ratio(int m, double sigma) {
  require_finite_weight_variance(sigma);
  const double s2 = sigma * sigma;
  return std::exp(m * std::log(s2 / std::sqrt(2.0 * s2 - 1.0)));
}

std::vector<ScalingRow> gaussian_scaling_study(std::span<const int> m_list,
                                               double sigma,
                                               double m_eff_target) {
  require_finite_weight_variance(sigma);
  if (!(m_eff_target > 0.0)) {
    throw DimensionError("gaussian_scaling_study: target must be positive");
  }
  const double s2 = sigma * sigma;
  const double per_dim = std::log(s2 / std::sqrt(2.0 * s2 - 1.0));
  std::vector<ScalingRow> rows;
  rows.reserve(m_list.size());
  for (int m : m_list) {
    if (m < 0) throw DimensionError("gaussian_scaling_study: negative m");
    rows.push_back({m, std::exp(m * per_dim + std::log(m_eff_target))});
  }
  return rows;
}

void write_scaling_csv(std::ostream& out, std::span<const ScalingRow> rows) {
  CsvWriter csv(out);
  csv.header({"m", "required_M"});
  for (const auto& r : rows) csv.row({static_cast<double>(r.m), r.required_M});
}

double empirical_weight_ratio(int m, double sigma, std::size_t M,
                              const RngStream& rng, unsigned threads) {
  require_finite_weight_variance(sigma);
  if (M == 0) throw DimensionError("empirical_weight_ratio: M = 0");
  const double s2 = sigma * sigma;
  // log f(x) - log f0(x) with x = sigma * z, z ~ N(0, I).
  const double quad = 0.5 * (s2 - 1.0);
  const double offset = m * std::log(sigma);
  Vector log_w(static_cast<Index>(M));
  parallel_for(M, threads, [&](std::size_t i) {
    RngStream s = rng.substream(i);
    double zz = 0.0;
    for (int k = 0; k < m; ++k) {
      const double z = s.normal();
      zz += z * z;
    }
    log_w[static_cast<Index>(i)] = offset - quad * zz;
  });
  return ess_from_log_weights(log_w).r_hat;
}

namespace {

double ode_rhs(const Density1d& f, const Density1d& g, double dir, double s,
               double u) {
  const double fu = f(u);
  const double gt = g(dir * s);
  const double v = dir * gt / fu;
  if (!std::isfinite(v) || !(fu > 0.0)) {
    std::ostringstream msg;
    msg << "non-finite right-hand side at t = " << dir * s << ", u = " << u;
    throw NumericalError("ode_map", msg.str());
  }
  return v;
}

double rk4_step(const Density1d& f, const Density1d& g, double dir, double s,
                double u, double h) {
  const double k1 = ode_rhs(f, g, dir, s, u);
  const double k2 = ode_rhs(f, g, dir, s + 0.5 * h, u + 0.5 * h * k1);
  const double k3 = ode_rhs(f, g, dir, s + 0.5 * h, u + 0.5 * h * k2);
  const double k4 = ode_rhs(f, g, dir, s + h, u + h * k3);
  return u + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
}

}  // namespace

TransportPoint ode_transport_map_1d(const Density1d& f, const Density1d& g,
                                    double xi, const OdeMapOptions& options) {
  const double xc = std::clamp(xi, -options.clip, options.clip);
  if (xc == 0.0) return {0.0, g(0.0) / f(0.0)};

  // Integrate in s = |t| so the step is always positive.
  const double dir = xc > 0.0 ? 1.0 : -1.0;
  const double span = std::abs(xc);
  double s = 0.0;
  double u = 0.0;
  double h = std::min(0.05, span);
  long steps = 0;
  while (s < span) {
    if (++steps > options.max_steps) {
      throw NumericalError("ode_map", "step limit exceeded");
    }
    h = std::min(h, span - s);
    const double full = rk4_step(f, g, dir, s, u, h);
    const double half = rk4_step(f, g, dir, s, u, 0.5 * h);
    const double two_half = rk4_step(f, g, dir, s + 0.5 * h, half, 0.5 * h);
    const double err = std::abs(two_half - full) / 15.0;
    const double tol = options.tolerance * (1.0 + std::abs(two_half));
    if (err <= tol) {
      s += h;
      u = two_half + (two_half - full) / 15.0;
      const double grow =
          err == 0.0 ? 4.0 : std::min(4.0, 0.9 * std::pow(tol / err, 0.2));
      h *= std::max(1.0, grow);
    } else {
      h *= std::max(0.1, 0.9 * std::pow(tol / err, 0.25));
      if (h < 1e-14 * (1.0 + span)) {
        throw NumericalError("ode_map", "step size underflow");
      }
    }
  }
  const double fx = f(u);
  if (!(fx > 0.0)) throw NumericalError("ode_map", "f vanishes at the image");
  return {u, g(xc) / fx};
}

}  // namespace isda
