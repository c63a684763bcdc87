#pragma once

#include <cstdint>
#include <vector>

#include "isda/filters.hpp"
#include "isda/implicit.hpp"

namespace isda::experiments {

/// Scalar model x' = 0.9 x + w, b = x + 0.1 x^3 + eta.
NonlinearSSM cubic_model(double q, double r, double x0_var = 1.0);

/// Exponential decay y(t) = a exp(-k t) observed at t_i = 0.2 i,
/// i = 0..n-1, with additive N(0, sd^2) noise. theta = (a, k).
struct DecayDemo {
  Vector theta_true;
  std::vector<double> times;
  PosteriorProblem problem;
};

DecayDemo exponential_decay_demo(std::uint64_t seed, double noise_sd = 0.05,
                                 int n_obs = 10);

/// Prior N(0, I_2), b = H theta + eta with a fixed 3x2 H.
struct LinearDemo {
  Vector theta_true;
  Matrix H;
  PosteriorProblem problem;
};

LinearDemo linear_gaussian_demo(std::uint64_t seed, double noise_var = 0.25);

}  // namespace isda::experiments
