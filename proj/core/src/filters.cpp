#include "isda/filters.hpp"

#include <cmath>
#include <memory>
#include <ostream>
#include <sstream>

#include "isda/csv.hpp"
#include "isda/error.hpp"
#include "isda/parallel.hpp"

namespace isda {

void LinearSSM::validate() const {
  const Index m = A.rows();
  if (A.cols() != m || H.cols() != m || Q.dim() != m || R.dim() != H.rows() ||
      x0.dim() != m) {
    throw DimensionError("LinearSSM: inconsistent dimensions");
  }
  if (!cholesky_psd(R.matrix()).full_rank()) {
    throw DimensionError("LinearSSM: R must be positive definite");
  }
}

NonlinearSSM LinearSSM::as_nonlinear() const {
  NonlinearSSM n;
  n.f = [a = A](const Vector& x) { return Vector(a * x); };
  n.h = [h = H](const Vector& x) { return Vector(h * x); };
  n.h_jacobian = [h = H](const Vector&) { return h; };
  n.observation_matrix = H;
  n.Q = Q;
  n.R = R;
  n.x0 = x0;
  return n;
}

LinearSSM model_problem(Index m, double q, double r, double x0_var) {
  if (q < 0.0 || !(r > 0.0)) {
    throw DimensionError("model_problem: need q >= 0 and r > 0");
  }
  LinearSSM s;
  s.A = Matrix::Identity(m, m);
  s.H = Matrix::Identity(m, m);
  s.Q = SymMatrix::diagonal(Vector::Constant(m, q));
  s.R = SymMatrix::diagonal(Vector::Constant(m, r));
  s.x0 = GaussianDensity::isotropic(Vector::Zero(m), x0_var);
  return s;
}

KalmanState kalman_step(const LinearSSM& model, const KalmanState& state,
                        const Vector& b) {
  if (b.size() != model.obs_dim()) {
    throw DimensionError("kalman_step: data vector has the wrong size");
  }
  const Matrix& a = model.A;
  const Matrix& h = model.H;
  const Matrix x = a * state.cov.matrix() * a.transpose() + model.Q.matrix();
  const Vector prior_mean = a * state.mean;
  const Matrix hx = h * x;
  const Matrix s = hx * h.transpose() + model.R.matrix();
  const CholeskyFactor sc = cholesky_psd(s);
  if (!sc.full_rank()) {
    throw NumericalError("kalman", "singular innovation covariance");
  }
  const Vector innovation = b - h * prior_mean;
  KalmanState out;
  out.mean = prior_mean + hx.transpose() * cholesky_solve(sc, innovation);
  out.cov = SymMatrix::from_matrix(x - hx.transpose() * cholesky_solve(sc, hx));
  return out;
}

FilterState initialize_filter(const GaussianDensity& x0, std::size_t M,
                              const RngStream& rng) {
  if (M == 0) throw DimensionError("initialize_filter: M must be positive");
  std::vector<Vector> samples(M);
  for (std::size_t j = 0; j < M; ++j) {
    RngStream s = rng.substream(j);
    samples[j] = x0.sample(s);
  }
  FilterState st;
  st.ensemble = WeightedEnsemble::uniform(std::move(samples));
  st.estimate = st.ensemble.mean();
  return st;
}

std::vector<std::size_t> systematic_resample_indices(const Vector& weights,
                                                     RngStream& rng) {
  const auto M = static_cast<std::size_t>(weights.size());
  std::vector<std::size_t> idx(M);
  if (M == 0) return idx;
  const double step = 1.0 / static_cast<double>(M);
  const double u0 = rng.uniform() * step;
  double cumulative = weights[0];
  std::size_t i = 0;
  for (std::size_t k = 0; k < M; ++k) {
    const double u = u0 + static_cast<double>(k) * step;
    while (u > cumulative && i + 1 < M) {
      ++i;
      cumulative += weights[static_cast<Index>(i)];
    }
    idx[k] = i;
  }
  return idx;
}

WeightedEnsemble systematic_resample(const WeightedEnsemble& e,
                                     RngStream& rng) {
  const auto idx = systematic_resample_indices(e.normalized_weights(), rng);
  std::vector<Vector> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(e.sample(i));
  return WeightedEnsemble::uniform(std::move(out));
}

namespace {

void apply_increments(FilterState& st, const Vector& increments,
                      const char* module) {
  try {
    st.ensemble.reweight(increments);
  } catch (const NumericalError& e) {
    std::ostringstream msg;
    msg << "weight collapse at step " << st.step + 1 << ": " << e.what();
    throw NumericalError(module, msg.str());
  }
}

void finish_step(FilterState& st, const RngStream& rng,
                 const FilterOptions& options) {
  ++st.step;
  st.log_weight_history.push_back(st.ensemble.normalized_log_weights());
  const EssReport r = ess(st.ensemble);
  st.ess_history.push_back(r.m_eff);
  st.estimate = st.ensemble.mean();
  st.resampled = false;
  const double M = static_cast<double>(st.ensemble.size());
  if (r.m_eff < options.resample_fraction * M) {
    RngStream rs = rng.substream(st.ensemble.size());
    st.ensemble = systematic_resample(st.ensemble, rs);
    ++st.resample_count;
    st.resampled = true;
  }
}

void require_nonempty(const FilterState& st) {
  if (st.ensemble.empty()) throw DimensionError("filter step: empty ensemble");
}

}  // namespace

FilterState sir_step(const NonlinearSSM& model, FilterState st,
                     const Vector& b, const RngStream& rng,
                     const FilterOptions& options) {
  require_nonempty(st);
  const std::size_t M = st.ensemble.size();
  const GaussianDensity process(Vector::Zero(model.state_dim()), model.Q);
  const GaussianDensity noise(Vector::Zero(model.obs_dim()), model.R);
  std::vector<Vector> next(M);
  Vector inc(static_cast<Index>(M));
  parallel_for(M, options.threads, [&](std::size_t j) {
    RngStream s = rng.substream(j);
    next[j] = model.f(st.ensemble.sample(j)) + process.transform(
                                                   s.normal_vector(
                                                       model.state_dim()));
    inc[static_cast<Index>(j)] = noise.log_density(b - model.h(next[j]));
  });
  st.ensemble.replace_samples(std::move(next));
  apply_increments(st, inc, "sir");
  finish_step(st, rng, options);
  return st;
}

FilterState optimal_step(const LinearSSM& model, FilterState st,
                         const Vector& b, const RngStream& rng,
                         const FilterOptions& options) {
  require_nonempty(st);
  const Index m = model.state_dim();
  const CholeskyFactor qc = cholesky_psd(model.Q.matrix());
  if (!qc.full_rank()) {
    throw NumericalError("optimal",
                         "Q is singular; the optimal proposal needs Q^-1 "
                         "(use the implicit filter)");
  }
  const CholeskyFactor rc = cholesky_psd(model.R.matrix());
  const Matrix q_inv = cholesky_solve(qc, Matrix(Matrix::Identity(m, m)));
  const Matrix rinv_h = cholesky_solve(rc, model.H);
  // Same factorization as the implicit filter's curvature, so both draw
  // through the identical L.
  const Curvature proposal = curvature_from_hessian(
      SymMatrix::from_matrix(q_inv + model.H.transpose() * rinv_h));
  const Vector data_term = rinv_h.transpose() * b;
  const GaussianDensity predictive(
      Vector::Zero(model.obs_dim()),
      SymMatrix::from_matrix(model.H * model.Q.matrix() *
                                 model.H.transpose() +
                             model.R.matrix()));

  const std::size_t M = st.ensemble.size();
  std::vector<Vector> next(M);
  Vector inc(static_cast<Index>(M));
  parallel_for(M, options.threads, [&](std::size_t j) {
    RngStream s = rng.substream(j);
    const Vector ax = model.A * st.ensemble.sample(j);
    const Vector mean = proposal.inverse * (q_inv * ax + data_term);
    next[j] = mean + proposal.L * s.normal_vector(m);
    inc[static_cast<Index>(j)] = predictive.log_density(b - model.H * ax);
  });
  st.ensemble.replace_samples(std::move(next));
  apply_increments(st, inc, "optimal");
  finish_step(st, rng, options);
  return st;
}

namespace {

struct StepPieces {
  const NonlinearSSM* model;
  CholeskyFactor qc;
  CholeskyFactor rc;
  Vector b;
};

ObjectiveF make_objective(std::shared_ptr<const StepPieces> pieces,
                          Vector prior_mean) {
  ObjectiveF f;
  f.dim = prior_mean.size();
  f.eval = [pieces, prior_mean](const Vector& x) {
    const double prior = forward_solve(pieces->qc, x - prior_mean).squaredNorm();
    const double data =
        forward_solve(pieces->rc, pieces->b - pieces->model->h(x)).squaredNorm();
    return 0.5 * (prior + data);
  };
  if (pieces->model->h_jacobian) {
    f.grad = [pieces, prior_mean](const Vector& x) {
      const NonlinearSSM& mdl = *pieces->model;
      const Vector resid = pieces->b - mdl.h(x);
      return Vector(cholesky_solve(pieces->qc, Vector(x - prior_mean)) -
                    mdl.h_jacobian(x).transpose() *
                        cholesky_solve(pieces->rc, resid));
    };
  }
  return f;
}

std::shared_ptr<const StepPieces> make_pieces(const NonlinearSSM& model,
                                              const Vector& b) {
  if (b.size() != model.obs_dim()) {
    throw DimensionError("filter step: data vector has the wrong size");
  }
  auto p = std::make_shared<StepPieces>();
  p->model = &model;
  p->qc = cholesky_psd(model.Q.matrix());
  p->rc = cholesky_psd(model.R.matrix());
  p->b = b;
  return p;
}

}  // namespace

ObjectiveF implicit_filter_objective(const NonlinearSSM& model,
                                     const Vector& prior_mean,
                                     const Vector& b) {
  return make_objective(make_pieces(model, b), prior_mean);
}

FilterState implicit_filter_step(const NonlinearSSM& model, FilterState st,
                                 const Vector& b, const RngStream& rng,
                                 const FilterOptions& options) {
  require_nonempty(st);
  const Index m = model.state_dim();
  auto pieces = make_pieces(model, b);
  if (!pieces->qc.full_rank()) {
    throw NumericalError("implicit_filter",
                         "Q is singular; F_j needs Q^-1");
  }

  MinimizeOptions base;
  Matrix q_inv;
  if (model.h_jacobian) {
    q_inv = cholesky_solve(pieces->qc, Matrix(Matrix::Identity(m, m)));
  }
  if (model.observation_matrix) {
    // Linear observation: every F_j has the same constant Hessian.
    const Matrix& h = *model.observation_matrix;
    auto c = std::make_shared<Curvature>(curvature_from_hessian(
        SymMatrix::from_matrix(q_inv + h.transpose() *
                                           cholesky_solve(pieces->rc, h))));
    base.initial_inverse_hessian = std::make_shared<Matrix>(c->inverse);
    base.known_curvature = std::move(c);
  }

  const std::size_t M = st.ensemble.size();
  std::vector<Vector> next(M);
  Vector inc(static_cast<Index>(M));
  parallel_for(M, options.threads, [&](std::size_t j) {
    RngStream s = rng.substream(j);
    const Vector prior_mean = model.f(st.ensemble.sample(j));
    const ObjectiveF fj = make_objective(pieces, prior_mean);
    try {
      MinimizeOptions opts = base;
      if (!model.observation_matrix && model.h_jacobian) {
        // Gauss-Newton curvature at the warm start.
        const Matrix jac = model.h_jacobian(prior_mean);
        const Matrix gn =
            q_inv + jac.transpose() * cholesky_solve(pieces->rc, jac);
        const CholeskyFactor gc = cholesky_psd(gn);
        if (gc.full_rank()) {
          opts.initial_inverse_hessian = std::make_shared<Matrix>(
              cholesky_solve(gc, Matrix(Matrix::Identity(m, m))));
        }
      }
      const MinResult min = minimize(fj, prior_mean, opts);
      ImplicitDraw d = implicit_sample(fj, min, s, options.root);
      next[j] = std::move(d.x);
      inc[static_cast<Index>(j)] = d.log_weight;
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "particle " << j << " at step " << st.step + 1 << ": "
          << e.what();
      throw NumericalError("implicit_filter", msg.str());
    }
  });
  st.ensemble.replace_samples(std::move(next));
  apply_increments(st, inc, "implicit_filter");
  finish_step(st, rng, options);
  return st;
}

TwinExperiment simulate_twin(const NonlinearSSM& model, std::size_t steps,
                             const RngStream& rng) {
  const GaussianDensity process(Vector::Zero(model.state_dim()), model.Q);
  const GaussianDensity noise(Vector::Zero(model.obs_dim()), model.R);
  TwinExperiment t;
  RngStream init = rng.substream(0);
  t.x0 = model.x0.sample(init);
  Vector x = t.x0;
  t.truth.reserve(steps);
  t.data.reserve(steps);
  for (std::size_t n = 0; n < steps; ++n) {
    RngStream s = rng.substream(n + 1);
    x = model.f(x) + process.transform(s.normal_vector(model.state_dim()));
    t.truth.push_back(x);
    t.data.push_back(model.h(x) +
                     noise.transform(s.normal_vector(model.obs_dim())));
  }
  return t;
}

FilterKind parse_filter_kind(const std::string& name) {
  if (name == "kalman") return FilterKind::kalman;
  if (name == "sir") return FilterKind::sir;
  if (name == "optimal") return FilterKind::optimal;
  if (name == "implicit") return FilterKind::implicit;
  throw DimensionError("unknown filter '" + name +
                       "' (expected kalman, sir, optimal or implicit)");
}

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::kalman: return "kalman";
    case FilterKind::sir: return "sir";
    case FilterKind::optimal: return "optimal";
    case FilterKind::implicit: return "implicit";
  }
  return "unknown";
}

std::vector<StepLog> run_filter(FilterKind kind, const NonlinearSSM& model,
                                const LinearSSM* linear,
                                const TwinExperiment& twin, std::size_t M,
                                const RngStream& rng,
                                const FilterOptions& options) {
  if ((kind == FilterKind::kalman || kind == FilterKind::optimal) && !linear) {
    throw DimensionError(to_string(kind) + " filter needs a linear model");
  }
  std::vector<StepLog> log;
  log.reserve(twin.data.size());

  if (kind == FilterKind::kalman) {
    KalmanState ks{linear->x0.mean(), linear->x0.cov()};
    for (std::size_t n = 0; n < twin.data.size(); ++n) {
      ks = kalman_step(*linear, ks, twin.data[n]);
      StepLog e;
      e.step = n + 1;
      e.estimate = ks.mean;
      e.truth = twin.truth[n];
      e.kalman_std = ks.cov.matrix().diagonal().cwiseMax(0.0).cwiseSqrt();
      log.push_back(std::move(e));
    }
    return log;
  }

  FilterState st = initialize_filter(model.x0, M, rng.substream(0));
  for (std::size_t n = 0; n < twin.data.size(); ++n) {
    const RngStream step_rng = rng.substream(n + 1);
    switch (kind) {
      case FilterKind::sir:
        st = sir_step(model, std::move(st), twin.data[n], step_rng, options);
        break;
      case FilterKind::optimal:
        st = optimal_step(*linear, std::move(st), twin.data[n], step_rng,
                          options);
        break;
      case FilterKind::implicit:
        st = implicit_filter_step(model, std::move(st), twin.data[n],
                                  step_rng, options);
        break;
      case FilterKind::kalman:
        break;
    }
    StepLog e;
    e.step = st.step;
    e.estimate = st.estimate;
    e.truth = twin.truth[n];
    e.m_eff = st.ess_history.back();
    e.resampled = st.resampled;
    log.push_back(std::move(e));
  }
  return log;
}

void write_run_log_csv(std::ostream& out, const std::vector<StepLog>& log) {
  CsvWriter csv(out);
  const Index m = log.empty() ? 0 : log.front().estimate.size();
  std::vector<std::string> names{"step"};
  for (Index i = 1; i <= m; ++i) names.push_back("estimate_" + std::to_string(i));
  for (Index i = 1; i <= m; ++i) names.push_back("truth_" + std::to_string(i));
  names.push_back("m_eff");
  names.push_back("resampled");
  csv.header(names);
  for (const auto& e : log) {
    std::vector<double> row{static_cast<double>(e.step)};
    for (Index i = 0; i < m; ++i) row.push_back(e.estimate[i]);
    for (Index i = 0; i < m; ++i) row.push_back(e.truth[i]);
    row.push_back(e.m_eff);
    row.push_back(e.resampled ? 1.0 : 0.0);
    csv.row(row);
  }
}

}  // namespace isda
