#include "isda/implicit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "isda/error.hpp"
#include "isda/parallel.hpp"

namespace isda {

Vector ObjectiveF::gradient(const Vector& x) const {
  if (grad) return grad(x);
  Vector g(x.size());
  Vector probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    probe[i] = x[i] + h;
    const double up = eval(probe);
    probe[i] = x[i] - h;
    const double down = eval(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

Curvature curvature_from_hessian(const SymMatrix& hessian) {
  const CholeskyFactor hc = cholesky_psd(hessian.matrix());
  if (!hc.full_rank()) {
    throw NumericalError("minimize",
                         "Hessian is not positive definite at the minimizer");
  }
  Curvature c;
  c.hessian = hessian;
  const Index m = hessian.dim();
  c.inverse = SymMatrix::from_matrix(
                  cholesky_solve(hc, Matrix(Matrix::Identity(m, m))))
                  .matrix();
  const CholeskyFactor lc = cholesky_psd(c.inverse);
  if (!lc.full_rank()) {
    throw NumericalError("minimize", "inverse Hessian is singular");
  }
  c.L = lc.lower;
  c.log_det_L = -0.5 * log_det(hc);
  return c;
}

SymMatrix finite_difference_hessian(const ObjectiveF& f, const Vector& x) {
  const Index m = x.size();
  Matrix h(m, m);
  Vector probe = x;
  if (f.has_gradient()) {
    for (Index j = 0; j < m; ++j) {
      const double step = 1e-5 * (1.0 + std::abs(x[j]));
      probe[j] = x[j] + step;
      const Vector up = f.grad(probe);
      probe[j] = x[j] - step;
      const Vector down = f.grad(probe);
      probe[j] = x[j];
      h.col(j) = (up - down) / (2.0 * step);
    }
    return SymMatrix::from_matrix(h);
  }
  Vector steps(m);
  for (Index j = 0; j < m; ++j) steps[j] = 1e-4 * (1.0 + std::abs(x[j]));
  auto at = [&](Index i, double si, Index j, double sj) {
    probe = x;
    probe[i] += si;
    probe[j] += sj;
    return f.eval(probe);
  };
  for (Index i = 0; i < m; ++i) {
    for (Index j = i; j < m; ++j) {
      const double hi = steps[i];
      const double hj = steps[j];
      const double v = (at(i, hi, j, hj) - at(i, hi, j, -hj) -
                        at(i, -hi, j, hj) + at(i, -hi, j, -hj)) /
                       (4.0 * hi * hj);
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return SymMatrix::from_matrix(h);
}

MinResult minimize(const ObjectiveF& f, const Vector& x0,
                   const MinimizeOptions& options) {
  const Index m = x0.size();
  if (f.dim != 0 && f.dim != m) {
    throw DimensionError("minimize: starting point has the wrong dimension");
  }
  Vector x = x0;
  double fx = f(x);
  if (!std::isfinite(fx)) {
    throw NumericalError("minimize", "objective is not finite at x0");
  }
  Vector g = f.gradient(x);

  Matrix hinv = options.initial_inverse_hessian
                    ? *options.initial_inverse_hessian
                    : Matrix(Matrix::Identity(m, m));
  bool scaled = static_cast<bool>(options.initial_inverse_hessian);

  int it = 0;
  for (;; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <
        options.gradient_tolerance * (1.0 + std::abs(fx))) {
      break;
    }
    if (it == options.max_iters) {
      std::ostringstream msg;
      msg << "no convergence after " << it << " iterations; |grad|_inf = "
          << g.lpNorm<Eigen::Infinity>();
      throw NumericalError("minimize", msg.str());
    }
    Vector d = -(hinv * g);
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      scaled = false;
      d = -g;
      slope = -g.squaredNorm();
    }
    // With a curvature-scaled inverse Hessian, -slope/2 is the predicted
    // decrease; once it is below the resolution of F no step can help.
    if (scaled && -slope <= 4.0 * std::numeric_limits<double>::epsilon() *
                                  (1.0 + std::abs(fx))) {
      break;
    }

    double alpha = 1.0;
    Vector xn;
    double fn = 0.0;
    for (;;) {
      xn = x + alpha * d;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + options.armijo * alpha * slope) {
        break;
      }
      alpha *= 0.5;
      if (alpha < 1e-16) {
        std::ostringstream msg;
        msg << "line search failed at iteration " << it
            << "; |grad|_inf = " << g.lpNorm<Eigen::Infinity>();
        throw NumericalError("minimize", msg.str());
      }
    }

    const Vector s = xn - x;
    Vector gn = f.gradient(xn);
    const Vector y = gn - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      if (!scaled) {
        hinv *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector hy = hinv * y;
      hinv += (rho * rho * y.dot(hy) + rho) * s * s.transpose() -
              rho * (s * hy.transpose() + hy * s.transpose());
    }
    x = std::move(xn);
    fx = fn;
    g = std::move(gn);
  }

  MinResult r;
  r.iterations = it;
  Matrix inverse;
  if (options.known_curvature) {
    r.hessian = options.known_curvature->hessian;
    r.L = options.known_curvature->L;
    r.log_det_L = options.known_curvature->log_det_L;
    inverse = options.known_curvature->inverse;
  } else {
    Curvature c = curvature_from_hessian(finite_difference_hessian(f, x));
    r.hessian = std::move(c.hessian);
    r.L = std::move(c.L);
    r.log_det_L = c.log_det_L;
    inverse = std::move(c.inverse);
  }

  // Newton steps with the curvature just computed remove the residual
  // gradient that the stopping rule tolerates.
  for (int k = 0; k < 2; ++k) {
    const Vector xn = x - inverse * g;
    const double fn = f(xn);
    if (!std::isfinite(fn) || fn > fx) break;
    const Vector gn = f.gradient(xn);
    if (!(gn.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>())) break;
    x = xn;
    fx = fn;
    g = gn;
  }
  r.minimizer = std::move(x);
  r.phi = fx;
  return r;
}

ImplicitDraw implicit_map(const ObjectiveF& f, const MinResult& min,
                          const Vector& xi, const RootOptions& options) {
  const Index m = min.minimizer.size();
  if (xi.size() != m) throw DimensionError("implicit_map: xi has wrong size");

  ImplicitDraw out;
  out.xi = xi;
  const double rho = xi.squaredNorm();
  if (rho == 0.0) {
    // Measure-zero draw at the mode; use the lambda -> 0 limit.
    out.x = min.minimizer;
    out.lambda = 0.0;
    out.log_jacobian = min.log_det_L;
    out.log_weight = -min.phi + out.log_jacobian;
    return out;
  }
  const double radius = std::sqrt(rho);
  const Vector v = min.L * (xi / radius);
  const double target = 0.5 * rho;

  auto point = [&](double lam) -> Vector { return min.minimizer + lam * v; };
  auto level = [&](const Vector& x) { return f(x) - min.phi - target; };
  auto slope = [&](double lam, const Vector& x) {
    if (f.has_gradient()) return f.grad(x).dot(v);
    const double h = 1e-6 * (1.0 + lam);
    return (f(point(lam + h)) - f(point(lam - h))) / (2.0 * h);
  };

  // Bracket the root: level(0) = -target < 0.
  double lo = 0.0;
  double hi = radius;
  double val_hi = level(point(hi));
  while (val_hi < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > options.lambda_max) {
      throw NumericalError("implicit",
                           "no root with lambda <= lambda_max along the "
                           "sampled direction");
    }
    val_hi = level(point(hi));
  }
  if (std::isnan(val_hi)) {
    throw NumericalError("implicit", "objective is NaN along the ray");
  }

  double lam = std::isfinite(val_hi) ? hi : 0.5 * (lo + hi);
  for (int it = 0;; ++it) {
    if (it == options.max_iters) {
      throw NumericalError("implicit", "root solve did not converge");
    }
    const Vector x = point(lam);
    const double val = level(x);
    if (val == 0.0) break;
    if (val < 0.0) {
      lo = lam;
    } else {
      hi = lam;
    }
    double next = std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(val)) {
      const double d = slope(lam, x);
      if (d > 0.0) next = lam - val / d;
    }
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const bool done =
        std::abs(next - lam) <= options.relative_tolerance * lam ||
        hi - lo <= options.relative_tolerance * lam;
    lam = next;
    if (done) break;
  }

  out.x = point(lam);
  out.lambda = lam;
  const double deriv = slope(lam, out.x);
  if (!(deriv > 0.0)) {
    throw NumericalError("implicit",
                         "grad F^T L eta <= 0 at the root: F is not "
                         "U-shaped along the sampled direction");
  }
  const double md = static_cast<double>(m);
  out.log_jacobian = min.log_det_L + (md - 1.0) * std::log(lam) +
                     0.5 * (2.0 - md) * std::log(rho) - std::log(deriv);
  out.log_weight = -min.phi + out.log_jacobian;
  return out;
}

ImplicitDraw implicit_sample(const ObjectiveF& f, const MinResult& min,
                             RngStream& rng, const RootOptions& options) {
  return implicit_map(f, min, rng.normal_vector(min.minimizer.size()),
                      options);
}

ImplicitDraw implicit_sample_surrogate(const ObjectiveF& target,
                                       const ObjectiveF& surrogate,
                                       const MinResult& surrogate_min,
                                       RngStream& rng,
                                       const RootOptions& options) {
  ImplicitDraw d = implicit_sample(surrogate, surrogate_min, rng, options);
  d.log_weight += surrogate(d.x) - target(d.x);
  return d;
}

ObjectiveF posterior_objective(const PosteriorProblem& p) {
  if (p.data.size() != p.noise.dim()) {
    throw DimensionError("PosteriorProblem: data and noise sizes differ");
  }
  ObjectiveF f;
  f.dim = p.prior.dim();
  // Copies keep the objective valid independently of `p`.
  f.eval = [prior = p.prior, noise = p.noise, forward = p.forward,
            data = p.data](const Vector& theta) {
    return -prior.log_density(theta) - noise.log_density(data - forward(theta));
  };
  if (p.forward_jacobian) {
    f.grad = [prior = p.prior, noise = p.noise, forward = p.forward,
              jac = p.forward_jacobian, data = p.data](const Vector& theta) {
      const Vector resid = data - forward(theta) - noise.mean();
      return Vector(prior.precision_times(theta - prior.mean()) -
                    jac(theta).transpose() * noise.precision_times(resid));
    };
  }
  return f;
}

WeightedEnsemble sample_posterior(const PosteriorProblem& problem,
                                  std::size_t M, const RngStream& rng,
                                  const SamplerOptions& options) {
  if (M == 0) throw DimensionError("sample_posterior: M must be positive");
  const ObjectiveF f = posterior_objective(problem);
  const MinResult min = minimize(f, problem.prior.mean(), options.minimize);
  std::vector<Vector> samples(M);
  Vector log_w(static_cast<Index>(M));
  parallel_for(M, options.threads, [&](std::size_t i) {
    RngStream s = rng.substream(i);
    ImplicitDraw d = implicit_sample(f, min, s, options.root);
    samples[i] = std::move(d.x);
    log_w[static_cast<Index>(i)] = d.log_weight;
  });
  return WeightedEnsemble(std::move(samples), std::move(log_w));
}

}  // namespace isda
