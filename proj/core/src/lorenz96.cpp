#include "isda/lorenz96.hpp"

#include <cmath>
#include <sstream>

#include "isda/error.hpp"

namespace isda {

namespace {

inline Index wrap(Index i, Index n) {
  const Index r = i % n;
  return r < 0 ? r + n : r;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

void Lorenz96TwoScale::validate() const {
  if (K < 4 || J < 1) {
    throw DimensionError("Lorenz96TwoScale: need K >= 4 and J >= 1");
  }
  if (!(eps > 0.0)) throw DimensionError("Lorenz96TwoScale: eps must be > 0");
}

Vector Lorenz96TwoScale::coupling(const Vector& y) const {
  Vector z(K);
  for (int k = 0; k < K; ++k) {
    z[k] = hx / J * y.segment(static_cast<Index>(k) * J, J).sum();
  }
  return z;
}

void Lorenz96TwoScale::tendency(const Vector& x, const Vector& y, Vector& dx,
                                Vector& dy) const {
  const Index nk = K;
  const Index ny = fast_size();
  reduced_tendency(F, x, dx);
  dx += coupling(y);
  dy.resize(ny);
  const double inv_eps = 1.0 / eps;
  for (Index i = 0; i < ny; ++i) {
    const Index k = i / J;
    const double adv =
        -y[wrap(i + 1, ny)] * (y[wrap(i + 2, ny)] - y[wrap(i - 1, ny)]);
    dy[i] = inv_eps * (adv - y[i] + hy * x[wrap(k, nk)]);
  }
}

void reduced_tendency(double F, const Vector& x, Vector& dx) {
  const Index n = x.size();
  dx.resize(n);
  for (Index k = 0; k < n; ++k) {
    dx[k] = -x[wrap(k - 1, n)] * (x[wrap(k - 2, n)] - x[wrap(k + 1, n)]) -
            x[k] + F;
  }
}

Vector reduced_step(double F, const Vector& x, double delta) {
  Vector k1, k2, k3, k4;
  reduced_tendency(F, x, k1);
  reduced_tendency(F, x + 0.5 * delta * k1, k2);
  reduced_tendency(F, x + 0.5 * delta * k2, k3);
  reduced_tendency(F, x + delta * k3, k4);
  return x + delta / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector reduced_rate(double F, const Vector& x, double delta) {
  return (reduced_step(F, x, delta) - x) / delta;
}

FullState default_initial_state(const Lorenz96TwoScale& model, RngStream rng) {
  model.validate();
  FullState s;
  s.x = Vector::Constant(model.K, model.F) + 0.1 * rng.normal_vector(model.K);
  s.y = 0.1 * rng.normal_vector(model.fast_size());
  return s;
}

FullState full_rk4_step(const Lorenz96TwoScale& model, const FullState& s,
                        double dt) {
  Vector ax, ay, bx, by, cx, cy, dx, dy;
  model.tendency(s.x, s.y, ax, ay);
  model.tendency(s.x + 0.5 * dt * ax, s.y + 0.5 * dt * ay, bx, by);
  model.tendency(s.x + 0.5 * dt * bx, s.y + 0.5 * dt * by, cx, cy);
  model.tendency(s.x + dt * cx, s.y + dt * cy, dx, dy);
  FullState out;
  out.x = s.x + dt / 6.0 * (ax + 2.0 * bx + 2.0 * cx + dx);
  out.y = s.y + dt / 6.0 * (ay + 2.0 * by + 2.0 * cy + dy);
  return out;
}

Trajectory integrate_full(const Lorenz96TwoScale& model, const FullState& init,
                          double dt, std::size_t n_snapshots,
                          const IntegrateOptions& options) {
  model.validate();
  if (init.x.size() != model.K || init.y.size() != model.fast_size()) {
    throw DimensionError("integrate_full: state size does not match K, J");
  }
  if (!(dt > 0.0) || dt > model.eps / 50.0) {
    std::ostringstream msg;
    msg << "integrate_full: dt = " << dt << " must lie in (0, eps/50 = "
        << model.eps / 50.0 << "]";
    throw DimensionError(msg.str());
  }
  if (options.snapshot_every == 0) {
    throw DimensionError("integrate_full: snapshot_every must be >= 1");
  }

  std::size_t step = 0;
  FullState s = init;
  auto advance = [&] {
    s = full_rk4_step(model, s, dt);
    ++step;
    if (!all_finite(s.x) || !all_finite(s.y)) {
      std::ostringstream msg;
      msg << "non-finite state at step " << step;
      throw NumericalError("lorenz96", msg.str());
    }
  };

  const auto spin_steps =
      static_cast<std::size_t>(std::llround(options.spinup / dt));
  for (std::size_t i = 0; i < spin_steps; ++i) advance();

  Trajectory t;
  t.dt = dt;
  t.snapshot_interval = dt * static_cast<double>(options.snapshot_every);
  t.x.reserve(n_snapshots);
  if (options.keep_fast) t.y.reserve(n_snapshots);
  for (std::size_t n = 0; n < n_snapshots; ++n) {
    if (n > 0) {
      for (std::size_t i = 0; i < options.snapshot_every; ++i) advance();
    }
    t.x.push_back(s.x);
    if (options.keep_fast) t.y.push_back(s.y);
  }
  t.final_state = s;
  return t;
}

}  // namespace isda
