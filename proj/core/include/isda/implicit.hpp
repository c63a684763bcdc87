#pragma once

#include <cstddef>
#include <functional>
#include <memory>

#include "isda/gaussian.hpp"
#include "isda/linalg.hpp"
#include "isda/rng.hpp"
#include "isda/sampling.hpp"

namespace isda {

/// F(x) = -log f(x) up to an additive constant. When `grad` is empty the
/// gradient is taken by central differences with step 1e-6 (1 + |x_i|).
struct ObjectiveF {
  std::function<double(const Vector&)> eval;
  std::function<Vector(const Vector&)> grad;
  Index dim = 0;

  double operator()(const Vector& x) const { return eval(x); }
  bool has_gradient() const noexcept { return static_cast<bool>(grad); }
  Vector gradient(const Vector& x) const;
};

/// Curvature at a minimizer: the Hessian and a lower-triangular L with
/// L L^T = hessian^{-1}.
struct Curvature {
  SymMatrix hessian;
  Matrix inverse;
  Matrix L;
  double log_det_L = 0.0;
};

/// Throws NumericalError if the Hessian is not positive definite.
Curvature curvature_from_hessian(const SymMatrix& hessian);

/// Finite-difference Hessian: differences of the analytic gradient when it
/// exists, second differences of F otherwise.
SymMatrix finite_difference_hessian(const ObjectiveF& f, const Vector& x);

struct MinResult {
  Vector minimizer;
  double phi = 0.0;  // F(minimizer)
  SymMatrix hessian;
  Matrix L;
  double log_det_L = 0.0;
  int iterations = 0;
};

struct MinimizeOptions {
  double gradient_tolerance = 1e-8;  // ||grad||_inf < tol (1 + |phi|)
  int max_iters = 10'000;
  double armijo = 1e-4;
  /// Starting inverse-Hessian approximation (identity when empty).
  std::shared_ptr<const Matrix> initial_inverse_hessian;
  /// Known curvature at the minimizer; skips the finite-difference Hessian.
  std::shared_ptr<const Curvature> known_curvature;
};

/// Dense BFGS with Armijo backtracking, then the Hessian and L at the
/// minimizer. Throws NumericalError on line-search failure, iteration
/// exhaustion, or a Hessian that is not positive definite.
MinResult minimize(const ObjectiveF& f, const Vector& x0,
                   const MinimizeOptions& options = {});

struct RootOptions {
  double lambda_max = 1e6;
  double relative_tolerance = 1e-12;
  int max_iters = 200;
};

struct ImplicitDraw {
  Vector x;
  double log_weight = 0.0;  // -phi + log J
  double log_jacobian = 0.0;
  Vector xi;
  double lambda = 0.0;
};

/// Solves F(mu + lambda L eta) - phi = |xi|^2 / 2 for lambda >= 0 along
/// eta = xi / |xi| (safeguarded Newton inside a bracket). Deterministic in
/// xi; the Jacobian is |det L| lambda^{m-1} rho^{(2-m)/2} / (grad F^T L eta).
ImplicitDraw implicit_map(const ObjectiveF& f, const MinResult& min,
                          const Vector& xi, const RootOptions& options = {});

/// Draws xi ~ N(0, I_m) from rng and applies implicit_map.
ImplicitDraw implicit_sample(const ObjectiveF& f, const MinResult& min,
                             RngStream& rng, const RootOptions& options = {});

/// Samples with a U-shaped surrogate F0 (min is F0's minimum) and corrects
/// the weight toward the target: log_weight += F0(x) - F(x).
ImplicitDraw implicit_sample_surrogate(const ObjectiveF& target,
                                       const ObjectiveF& surrogate,
                                       const MinResult& surrogate_min,
                                       RngStream& rng,
                                       const RootOptions& options = {});

/// Bayesian parameter estimation: prior p0 over theta, data d = h(theta) + eta.
struct PosteriorProblem {
  GaussianDensity prior;
  std::function<Vector(const Vector&)> forward;
  GaussianDensity noise;
  Vector data;
  /// Optional Jacobian of `forward` (k x m); enables an analytic gradient.
  std::function<Matrix(const Vector&)> forward_jacobian;
};

/// F(theta) = -log p0(theta) - log p_eta(d - h(theta)).
ObjectiveF posterior_objective(const PosteriorProblem& problem);

struct SamplerOptions {
  unsigned threads = 1;
  MinimizeOptions minimize;
  RootOptions root;
};

/// One minimization, then M implicit samples; sample i uses
/// rng.substream(i).
WeightedEnsemble sample_posterior(const PosteriorProblem& problem,
                                  std::size_t M, const RngStream& rng,
                                  const SamplerOptions& options = {});

}  // namespace isda
