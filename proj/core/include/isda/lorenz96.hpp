#pragma once

#include <cstddef>
#include <vector>

#include "isda/linalg.hpp"
#include "isda/rng.hpp"

namespace isda {

/// Two-scale Lorenz '96 system. The fast variables are stored flattened,
/// y[k*J + j], and indexed cyclically over all K*J entries so that y_{J+1,k}
/// is y_{1,k+1}.
struct Lorenz96TwoScale {
  int K = 18;
  int J = 20;
  double F = 10.0;
  double eps = 0.5;
  double hx = -1.0;
  double hy = 1.0;

  void validate() const;
  Index fast_size() const noexcept { return static_cast<Index>(K) * J; }

  /// Cyclic flat indices (0-based): x_{k+K} = x_k, y_{j,k+K} = y_{j,k},
  /// y_{j+J,k} = y_{j,k+1}.
  Index x_index(Index k) const noexcept {
    const Index r = k % K;
    return r < 0 ? r + K : r;
  }
  Index y_index(Index j, Index k) const noexcept {
    const Index n = fast_size();
    const Index r = (x_index(k) * J + j) % n;
    return r < 0 ? r + n : r;
  }

  /// Full tendencies at (x, y).
  void tendency(const Vector& x, const Vector& y, Vector& dx, Vector& dy) const;
  /// z_k = (hx / J) sum_j y_{j,k}.
  Vector coupling(const Vector& y) const;
};

/// dX/dt = R0(X) with R0_k = -X_{k-1}(X_{k-2} - X_{k+1}) - X_k + F.
void reduced_tendency(double F, const Vector& x, Vector& dx);
/// One RK4 step of length delta on the reduced model.
Vector reduced_step(double F, const Vector& x, double delta);
/// R_delta(x) = (reduced_step(x) - x) / delta.
Vector reduced_rate(double F, const Vector& x, double delta);

struct FullState {
  Vector x;
  Vector y;
};

/// x near the forcing plus small random perturbations; y small and random.
FullState default_initial_state(const Lorenz96TwoScale& model, RngStream rng);

FullState full_rk4_step(const Lorenz96TwoScale& model, const FullState& s,
                        double dt);

struct IntegrateOptions {
  double spinup = 10.0;           // discarded time units
  std::size_t snapshot_every = 1;  // RK4 steps between stored snapshots
  bool keep_fast = false;
};

struct Trajectory {
  double dt = 0.0;
  double snapshot_interval = 0.0;
  std::vector<Vector> x;  // snapshots, the first at the end of spin-up
  std::vector<Vector> y;  // filled when keep_fast is set
  FullState final_state;
};

/// RK4 of the full system with step dt <= eps/50. Records
/// `n_snapshots` snapshots after spin-up. A non-finite state throws
/// NumericalError naming the step index.
Trajectory integrate_full(const Lorenz96TwoScale& model, const FullState& init,
                          double dt, std::size_t n_snapshots,
                          const IntegrateOptions& options = {});

}  // namespace isda
