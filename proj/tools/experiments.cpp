#include "experiments.hpp"

#include <cmath>

namespace isda::experiments {

NonlinearSSM cubic_model(double q, double r, double x0_var) {
  NonlinearSSM m{
      [](const Vector& x) -> Vector { return 0.9 * x; },
      [](const Vector& x) -> Vector {
        return x + 0.1 * x.array().cube().matrix();
      },
      [](const Vector& x) -> Matrix {
        Matrix j(1, 1);
        j(0, 0) = 1.0 + 0.3 * x[0] * x[0];
        return j;
      },
      std::nullopt,
      SymMatrix::diagonal(Vector::Constant(1, q)),
      SymMatrix::diagonal(Vector::Constant(1, r)),
      GaussianDensity::isotropic(Vector::Zero(1), x0_var),
  };
  return m;
}

DecayDemo exponential_decay_demo(std::uint64_t seed, double noise_sd,
                                 int n_obs) {
  DecayDemo d;
  d.theta_true = Vector(2);
  d.theta_true << 1.0, 0.5;
  for (int i = 0; i < n_obs; ++i) d.times.push_back(0.2 * i);
  const std::vector<double> t = d.times;

  auto forward = [t](const Vector& th) -> Vector {
    Vector y(static_cast<Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) {
      y[static_cast<Index>(i)] = th[0] * std::exp(-th[1] * t[i]);
    }
    return y;
  };
  auto jac = [t](const Vector& th) -> Matrix {
    Matrix j(static_cast<Index>(t.size()), 2);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double e = std::exp(-th[1] * t[i]);
      j(static_cast<Index>(i), 0) = e;
      j(static_cast<Index>(i), 1) = -th[0] * t[i] * e;
    }
    return j;
  };

  RngStream rng(seed, 1);
  Vector data = forward(d.theta_true) +
                noise_sd * rng.normal_vector(static_cast<Index>(n_obs));

  Vector prior_mean(2);
  prior_mean << 0.8, 0.8;
  d.problem = PosteriorProblem{
      GaussianDensity(prior_mean, SymMatrix::diagonal(Vector::Constant(2, 0.25))),
      forward,
      GaussianDensity::isotropic(Vector::Zero(n_obs), noise_sd * noise_sd),
      data,
      jac,
  };
  return d;
}

LinearDemo linear_gaussian_demo(std::uint64_t seed, double noise_var) {
  LinearDemo d;
  d.H = Matrix(3, 2);
  d.H << 1.0, 0.5,
         0.0, 1.0,
         1.0, -1.0;
  RngStream rng(seed, 1);
  d.theta_true = rng.normal_vector(2);
  Vector data = d.H * d.theta_true + std::sqrt(noise_var) * rng.normal_vector(3);
  const Matrix h = d.H;
  d.problem = PosteriorProblem{
      GaussianDensity::standard(2),
      [h](const Vector& th) -> Vector { return h * th; },
      GaussianDensity::isotropic(Vector::Zero(3), noise_var),
      data,
      [h](const Vector&) -> Matrix { return h; },
  };
  return d;
}

}  // namespace isda::experiments
