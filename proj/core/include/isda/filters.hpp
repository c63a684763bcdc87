#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "isda/gaussian.hpp"
#include "isda/implicit.hpp"
#include "isda/linalg.hpp"
#include "isda/rng.hpp"
#include "isda/sampling.hpp"

namespace isda {

struct NonlinearSSM;

/// x^{n+1} = A x^n + w,  b^{n+1} = H x^{n+1} + eta,  w ~ N(0,Q), eta ~ N(0,R).
struct LinearSSM {
  Matrix A;
  Matrix H;
  SymMatrix Q;
  SymMatrix R;
  GaussianDensity x0;

  Index state_dim() const noexcept { return A.rows(); }
  Index obs_dim() const noexcept { return H.rows(); }
  /// Throws DimensionError on inconsistent sizes or a singular R.
  void validate() const;
  NonlinearSSM as_nonlinear() const;
};

/// x^{n+1} = f(x^n) + w,  b^{n+1} = h(x^{n+1}) + eta.
struct NonlinearSSM {
  std::function<Vector(const Vector&)> f;
  std::function<Vector(const Vector&)> h;
  /// Optional Jacobian of h (k x m); used for analytic gradients.
  std::function<Matrix(const Vector&)> h_jacobian;
  /// Set when h(x) = H x; the implicit filter then shares one Hessian
  /// across particles.
  std::optional<Matrix> observation_matrix;
  SymMatrix Q;
  SymMatrix R;
  GaussianDensity x0;

  Index state_dim() const noexcept { return Q.dim(); }
  Index obs_dim() const noexcept { return R.dim(); }
};

/// Linear model problem A = H = I_m, Q = q I, R = r I, x0 ~ N(0, x0_var I).
LinearSSM model_problem(Index m, double q, double r, double x0_var = 1.0);

struct KalmanState {
  Vector mean;
  SymMatrix cov;
};

KalmanState kalman_step(const LinearSSM& model, const KalmanState& state,
                        const Vector& b);

struct FilterState {
  std::size_t step = 0;
  WeightedEnsemble ensemble;
  /// Normalized log-weights after each update, before any resampling.
  std::vector<Vector> log_weight_history;
  std::vector<double> ess_history;
  std::size_t resample_count = 0;
  bool resampled = false;
  /// Weighted mean after the update, before resampling.
  Vector estimate;
};

struct FilterOptions {
  unsigned threads = 1;
  /// Resample when M_eff < resample_fraction * M; 0 disables resampling.
  double resample_fraction = 0.5;
  RootOptions root;
};

/// M draws from the initial density, equal weights.
FilterState initialize_filter(const GaussianDensity& x0, std::size_t M,
                              const RngStream& rng);

/// Proposal from the model, weight by p(b | x). Particle j uses
/// rng.substream(j); resampling uses rng.substream(M).
FilterState sir_step(const NonlinearSSM& model, FilterState state,
                     const Vector& b, const RngStream& rng,
                     const FilterOptions& options = {});

/// Proposal p(x^{n+1} | x^n, b^{n+1}) for a linear model; weight by
/// p(b | x^n) = N(b; H A x^n, H Q H^T + R). Throws NumericalError if Q is
/// singular.
FilterState optimal_step(const LinearSSM& model, FilterState state,
                         const Vector& b, const RngStream& rng,
                         const FilterOptions& options = {});

/// Per particle: minimize F_j, draw one implicit sample, weight by
/// exp(-phi_j) J_j. Failures are rethrown tagged with the particle index.
FilterState implicit_filter_step(const NonlinearSSM& model, FilterState state,
                                 const Vector& b, const RngStream& rng,
                                 const FilterOptions& options = {});

/// Offspring indices from one stratified sweep with offset u ~ U(0, 1/M).
std::vector<std::size_t> systematic_resample_indices(const Vector& weights,
                                                     RngStream& rng);
/// Resampled ensemble with weights 1/M.
WeightedEnsemble systematic_resample(const WeightedEnsemble& e,
                                     RngStream& rng);

/// Negative log of the particle-j objective of the implicit filter:
/// 1/2 |x - f(X_j)|^2_{Q^-1} + 1/2 |b - h(x)|^2_{R^-1}.
ObjectiveF implicit_filter_objective(const NonlinearSSM& model,
                                     const Vector& prior_mean,
                                     const Vector& b);

/// Synthetic truth and data, generated from their own streams so that the
/// same seed gives the same realization for every filter.
struct TwinExperiment {
  Vector x0;
  std::vector<Vector> truth;  // x^1..x^N
  std::vector<Vector> data;   // b^1..b^N
};

TwinExperiment simulate_twin(const NonlinearSSM& model, std::size_t steps,
                             const RngStream& rng);

enum class FilterKind { kalman, sir, optimal, implicit };

FilterKind parse_filter_kind(const std::string& name);
std::string to_string(FilterKind kind);

struct StepLog {
  std::size_t step = 0;
  Vector estimate;
  Vector truth;
  double m_eff = 0.0;  // 0 for the Kalman filter
  bool resampled = false;
  Vector kalman_std;   // filled for the Kalman filter only
};

/// Runs one filter through a twin experiment. `linear` is required for the
/// Kalman and optimal filters.
std::vector<StepLog> run_filter(FilterKind kind, const NonlinearSSM& model,
                                const LinearSSM* linear,
                                const TwinExperiment& twin, std::size_t M,
                                const RngStream& rng,
                                const FilterOptions& options = {});

/// `step,estimate_1..estimate_m,truth_1..truth_m,m_eff,resampled`.
void write_run_log_csv(std::ostream& out, const std::vector<StepLog>& log);

}  // namespace isda
