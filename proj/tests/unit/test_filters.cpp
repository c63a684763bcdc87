#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "isda/error.hpp"
#include "isda/filters.hpp"
#include "oracles.hpp"

using namespace isda;

namespace {

LinearSSM scalar_model(double q, double r) { return model_problem(1, q, r); }

NonlinearSSM cubic_observation_model(double q, double r) {
  NonlinearSSM m;
  m.f = [](const Vector& x) -> Vector { return 0.9 * x; };
  m.h = [](const Vector& x) -> Vector { return x + 0.1 * x.array().cube().matrix(); };
  m.h_jacobian = [](const Vector& x) -> Matrix {
    return Matrix::Constant(1, 1, 1.0 + 0.3 * x[0] * x[0]);
  };
  m.Q = SymMatrix::diagonal(Vector::Constant(1, q));
  m.R = SymMatrix::diagonal(Vector::Constant(1, r));
  m.x0 = GaussianDensity::isotropic(Vector::Zero(1), 1.0);
  return m;
}

LinearSSM two_dim_model() {
  LinearSSM s;
  s.A = Matrix(2, 2);
  s.A << 0.9, 0.2, -0.1, 0.8;
  s.H = Matrix(1, 2);
  s.H << 1.0, 0.5;
  Matrix q(2, 2);
  q << 0.5, 0.1, 0.1, 0.3;
  s.Q = SymMatrix::from_matrix(q);
  s.R = SymMatrix::diagonal(Vector::Constant(1, 0.2));
  s.x0 = GaussianDensity::isotropic(Vector::Zero(2), 1.0);
  return s;
}

double log_normal(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Eigen::LLT<Matrix> llt(cov);
  const Vector z = llt.matrixL().solve(x - mean);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * z.squaredNorm() - 0.5 * logdet -
         0.5 * static_cast<double>(x.size()) * std::log(2 * M_PI);
}

Vector normalize_log(Vector v) {
  const double mx = v.maxCoeff();
  const double lse = mx + std::log((v.array() - mx).exp().sum());
  return v.array() - lse;
}

double weight_variance(const Vector& log_w) {
  const Vector w = log_w.array().exp();
  return (w.array() - w.mean()).square().mean();
}

}  // namespace

TEST(Kalman, PerfectModelIgnoresData) {
  const LinearSSM s = model_problem(3, 0.0, 2.0);
  KalmanState k{Vector::Constant(3, 1.5), SymMatrix(3)};
  for (int n = 0; n < 5; ++n) {
    k = kalman_step(s, k, Vector::Constant(3, 10.0 * n));
    EXPECT_LT(k.cov.matrix().cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((k.mean - Vector::Constant(3, 1.5)).norm(), 1e-14);
  }
}

TEST(Kalman, ScalarConvergesToGoldenRatio) {
  const LinearSSM s = scalar_model(1.0, 1.0);
  KalmanState k{Vector::Zero(1), SymMatrix::identity(1)};
  for (int n = 0; n < 100; ++n) k = kalman_step(s, k, Vector::Constant(1, 0.3));
  EXPECT_NEAR(k.cov(0, 0), (std::sqrt(5.0) - 1.0) / 2.0, 1e-12);
}

TEST(Kalman, DiagonalSystemDecouples) {
  LinearSSM s;
  s.A = Vector(Eigen::Vector2d(0.9, 1.1)).asDiagonal();
  s.H = Vector(Eigen::Vector2d(1.0, 2.0)).asDiagonal();
  s.Q = SymMatrix::diagonal(Eigen::Vector2d(0.3, 0.7));
  s.R = SymMatrix::diagonal(Eigen::Vector2d(0.5, 0.2));
  s.x0 = GaussianDensity::isotropic(Vector::Zero(2), 1.0);
  KalmanState k{Vector::Zero(2), SymMatrix::identity(2)};
  double mean[2] = {0, 0}, var[2] = {1, 1};
  const double a[2] = {0.9, 1.1}, h[2] = {1.0, 2.0}, q[2] = {0.3, 0.7}, r[2] = {0.5, 0.2};
  oracle::TestRng rng(1);
  for (int n = 0; n < 20; ++n) {
    const Vector b = Eigen::Vector2d(rng.normal(), rng.normal());
    k = kalman_step(s, k, b);
    for (int i = 0; i < 2; ++i) {
      const double x = a[i] * a[i] * var[i] + q[i];
      const double g = x * h[i] / (h[i] * h[i] * x + r[i]);
      mean[i] = a[i] * mean[i] + g * (b[i] - h[i] * a[i] * mean[i]);
      var[i] = (1 - g * h[i]) * x;
      EXPECT_NEAR(k.mean[i], mean[i], 1e-12);
      EXPECT_NEAR(k.cov(i, i), var[i], 1e-12);
    }
    EXPECT_NEAR(k.cov(0, 1), 0.0, 1e-15);
  }
}

TEST(Kalman, WrongDataSizeThrows) {
  const LinearSSM s = model_problem(2, 1.0, 1.0);
  KalmanState k{Vector::Zero(2), SymMatrix::identity(2)};
  EXPECT_THROW(kalman_step(s, k, Vector::Zero(3)), DimensionError);
}

TEST(Sir, VacuousDataKeepsUniformWeights) {
  const LinearSSM s = model_problem(2, 1.0, 1e12);
  const NonlinearSSM n = s.as_nonlinear();
  FilterState st = initialize_filter(s.x0, 500, RngStream(2));
  for (int k = 0; k < 5; ++k) {
    st = sir_step(n, std::move(st), Vector::Constant(2, 3.0), RngStream(3, k));
    EXPECT_GT(st.ess_history.back(), 500.0 * (1.0 - 1e-9));
    EXPECT_FALSE(st.resampled);
  }
}

TEST(Sir, ModelProblemCollapsesQuickly) {
  const LinearSSM s = model_problem(100, 1.0, 1.0);
  const NonlinearSSM n = s.as_nonlinear();
  const TwinExperiment twin = simulate_twin(n, 5, RngStream(4, 1));
  FilterState st = initialize_filter(s.x0, 100, RngStream(4, 2));
  double min_ess = 100.0;
  for (std::size_t k = 0; k < twin.data.size(); ++k) {
    st = sir_step(n, std::move(st), twin.data[k], RngStream(4, 3 + k));
    min_ess = std::min(min_ess, st.ess_history.back());
  }
  EXPECT_LT(min_ess, 5.0);
}

TEST(Sir, InfiniteMisfitEverywhereIsAnError) {
  NonlinearSSM n = scalar_model(1.0, 1.0).as_nonlinear();
  n.h = [](const Vector& x) -> Vector {
    return Vector::Constant(x.size(), std::numeric_limits<double>::infinity());
  };
  FilterState st = initialize_filter(n.x0, 10, RngStream(5));
  try {
    sir_step(n, st, Vector::Zero(1), RngStream(6));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("collapse"), std::string::npos) << e.what();
  }
}

TEST(Optimal, ZeroObservationReducesToModelProposal) {
  LinearSSM s = scalar_model(0.7, 1.0);
  s.H = Matrix::Zero(1, 1);
  FilterState st = initialize_filter(s.x0, 200, RngStream(7));
  const FilterState out = optimal_step(s, st, Vector::Constant(1, 4.0), RngStream(8));
  const FilterState sir = sir_step(s.as_nonlinear(), st, Vector::Constant(1, 4.0), RngStream(8));
  EXPECT_LT(weight_variance(out.log_weight_history.back()), 1e-30);
  for (std::size_t j = 0; j < 200; ++j) {
    EXPECT_NEAR(out.ensemble.sample(j)[0], sir.ensemble.sample(j)[0], 1e-12);
  }
}

TEST(Optimal, SingularQIsReported) {
  const LinearSSM s = model_problem(2, 0.0, 1.0);
  FilterState st = initialize_filter(s.x0, 10, RngStream(9));
  EXPECT_THROW(optimal_step(s, st, Vector::Zero(2), RngStream(10)), NumericalError);
}

TEST(Optimal, WeightVarianceNotAboveSir) {
  const LinearSSM s = scalar_model(1.0, 1.0);
  const NonlinearSSM n = s.as_nonlinear();
  FilterOptions no_resample;
  no_resample.resample_fraction = 0.0;
  int wins = 0;
  for (int seed = 0; seed < 20; ++seed) {
    const TwinExperiment twin = simulate_twin(n, 50, RngStream(100 + seed, 1));
    double v_opt = 0.0, v_sir = 0.0;
    FilterOptions opts;
    FilterState so = initialize_filter(s.x0, 1000, RngStream(100 + seed, 2));
    for (std::size_t k = 0; k < twin.data.size(); ++k) {
      const RngStream r(100 + seed, 3 + k);
      // Both start each step from the same ensemble.
      FilterState base = so;
      base.log_weight_history.clear();
      const FilterState a = optimal_step(s, base, twin.data[k], r, no_resample);
      const FilterState b = sir_step(n, base, twin.data[k], r, no_resample);
      v_opt += weight_variance(a.log_weight_history.back());
      v_sir += weight_variance(b.log_weight_history.back());
      so = optimal_step(s, std::move(so), twin.data[k], r, opts);
    }
    if (v_opt <= v_sir) ++wins;
  }
  EXPECT_EQ(wins, 20);
}

TEST(Optimal, ScalarModelProblemDoesNotCollapse) {
  const LinearSSM s = scalar_model(1.0, 1.0);
  const NonlinearSSM n = s.as_nonlinear();
  const TwinExperiment twin = simulate_twin(n, 1000, RngStream(11, 1));
  FilterState st = initialize_filter(s.x0, 100, RngStream(11, 2));
  for (std::size_t k = 0; k < twin.data.size(); ++k) {
    st = optimal_step(s, std::move(st), twin.data[k], RngStream(11, 3 + k));
  }
  std::vector<double> e = st.ess_history;
  std::sort(e.begin(), e.end());
  EXPECT_GT(e[e.size() / 2], 50.0);
  const auto collapsed = std::count_if(e.begin(), e.end(), [](double v) { return v < 10.0; });
  EXPECT_LE(collapsed, 10) << "min M_eff " << e.front();
}

TEST(Implicit, CoincidesWithOptimalOnLinearModel) {
  const LinearSSM s = two_dim_model();
  const NonlinearSSM n = s.as_nonlinear();
  const TwinExperiment twin = simulate_twin(n, 20, RngStream(12, 1));
  FilterState a = initialize_filter(s.x0, 200, RngStream(12, 2));
  FilterState b = a;
  for (std::size_t k = 0; k < twin.data.size(); ++k) {
    const RngStream r(12, 3 + k);
    a = optimal_step(s, std::move(a), twin.data[k], r);
    b = implicit_filter_step(n, std::move(b), twin.data[k], r);
    const Vector wa = a.log_weight_history.back().array().exp();
    const Vector wb = b.log_weight_history.back().array().exp();
    EXPECT_LT((wa - wb).cwiseAbs().maxCoeff(), 1e-8) << "step " << k;
    EXPECT_LT((a.estimate - b.estimate).norm(), 1e-6);
  }
}

TEST(Implicit, CubicObservationBeatsSir) {
  const NonlinearSSM n = cubic_observation_model(1.0, 0.1);
  double rmse_sir = 0.0, rmse_imp = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    const TwinExperiment twin = simulate_twin(n, 50, RngStream(200 + seed, 1));
    const auto ls = run_filter(FilterKind::sir, n, nullptr, twin, 100, RngStream(200 + seed, 2));
    const auto li = run_filter(FilterKind::implicit, n, nullptr, twin, 100, RngStream(200 + seed, 2));
    for (std::size_t k = 0; k < ls.size(); ++k) {
      rmse_sir += (ls[k].estimate - ls[k].truth).squaredNorm();
      rmse_imp += (li[k].estimate - li[k].truth).squaredNorm();
    }
  }
  EXPECT_LT(rmse_imp, rmse_sir);
}

TEST(Implicit, TinyModelNoiseConcentratesOnPrediction) {
  LinearSSM s = scalar_model(1e-10, 1.0);
  s.A = Matrix::Constant(1, 1, 0.8);
  const NonlinearSSM n = s.as_nonlinear();
  FilterState st = initialize_filter(s.x0, 50, RngStream(13));
  const FilterState out = implicit_filter_step(n, st, Vector::Constant(1, 0.8 * 0.5), RngStream(14));
  for (std::size_t j = 0; j < 50; ++j) {
    EXPECT_NEAR(out.ensemble.sample(j)[0], 0.8 * st.ensemble.sample(j)[0], 1e-4);
  }
}

TEST(Implicit, FailuresCarryParticleIndex) {
  NonlinearSSM n = cubic_observation_model(1.0, 1.0);
  n.h = [](const Vector& x) -> Vector {
    return Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
  };
  n.h_jacobian = {};
  FilterState st = initialize_filter(n.x0, 4, RngStream(15));
  try {
    implicit_filter_step(n, st, Vector::Zero(1), RngStream(16));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("particle"), std::string::npos) << e.what();
  }
}

TEST(Resample, UniformWeightsCopyEachOnce) {
  RngStream rng(17);
  const auto idx = systematic_resample_indices(Vector::Constant(8, 1.0 / 8), rng);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(idx[k], k);
}

TEST(Resample, DegenerateWeightsCopyFirst) {
  RngStream rng(18);
  Vector w = Vector::Zero(6);
  w[0] = 1.0;
  for (std::size_t i : systematic_resample_indices(w, rng)) EXPECT_EQ(i, 0u);
}

TEST(Resample, OutputHasEqualWeights) {
  std::vector<Vector> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(Vector::Constant(1, i));
  const WeightedEnsemble e(xs, (Vector(5) << 0, -1, 2, 0.5, -3).finished());
  RngStream rng(19);
  const WeightedEnsemble r = systematic_resample(e, rng);
  EXPECT_EQ(r.size(), 5u);
  EXPECT_LT((r.normalized_weights().array() - 0.2).abs().maxCoeff(), 1e-15);
}

TEST(Resample, Unbiased) {
  Vector w(5);
  w << 0.05, 0.4, 0.12, 0.33, 0.10;
  const int trials = 100000;
  Vector sum = Vector::Zero(5), sq = Vector::Zero(5);
  for (int t = 0; t < trials; ++t) {
    RngStream rng(20, t);
    Vector c = Vector::Zero(5);
    for (std::size_t i : systematic_resample_indices(w, rng)) c[static_cast<Index>(i)] += 1;
    sum += c;
    sq += c.cwiseProduct(c);
  }
  for (Index i = 0; i < 5; ++i) {
    const double mean = sum[i] / trials;
    const double sd = std::sqrt(std::max(sq[i] / trials - mean * mean, 1e-12));
    EXPECT_LT(std::abs(mean - 5 * w[i]), 3 * sd / std::sqrt(double(trials)) + 1e-12) << i;
  }
}

TEST(WeightRecursion, OptimalIncrementsAssembleFromThreeTerms) {
  const LinearSSM s = two_dim_model();
  FilterOptions no_resample;
  no_resample.resample_fraction = 0.0;
  FilterState st = initialize_filter(s.x0, 50, RngStream(21));
  // Random, non-uniform starting weights.
  oracle::TestRng trng(22);
  Vector lw0(50);
  for (Index j = 0; j < 50; ++j) lw0[j] = trng.normal();
  st.ensemble = WeightedEnsemble(st.ensemble.samples(), lw0);
  const Vector b = Vector::Constant(1, 0.7);
  const FilterState out = optimal_step(s, st, b, RngStream(23), no_resample);

  const Matrix Q = s.Q.matrix(), R = s.R.matrix(), H = s.H, A = s.A;
  const Matrix sigma = (Q.inverse() + H.transpose() * R.inverse() * H).inverse();
  Vector expect(50);
  for (Index j = 0; j < 50; ++j) {
    const Vector xp = st.ensemble.sample(j);
    const Vector x = out.ensemble.sample(j);
    const Vector mean = sigma * (Q.inverse() * A * xp + H.transpose() * R.inverse() * b);
    expect[j] = lw0[j] + log_normal(x, A * xp, Q) + log_normal(b, H * x, R) -
                log_normal(x, mean, sigma);
  }
  const Vector lhs = out.log_weight_history.back();
  EXPECT_LT((lhs - normalize_log(expect)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(WeightRecursion, SirIncrementIsLikelihood) {
  const LinearSSM s = two_dim_model();
  FilterOptions no_resample;
  no_resample.resample_fraction = 0.0;
  const FilterState st = initialize_filter(s.x0, 50, RngStream(24));
  const Vector b = Vector::Constant(1, -0.4);
  const FilterState out = sir_step(s.as_nonlinear(), st, b, RngStream(25), no_resample);
  Vector expect(50);
  for (Index j = 0; j < 50; ++j) {
    const Vector x = out.ensemble.sample(j);
    const Vector xp = st.ensemble.sample(j);
    // prior term and proposal cancel
    expect[j] = log_normal(x, s.A * xp, s.Q.matrix()) + log_normal(b, s.H * x, s.R.matrix()) -
                log_normal(x, s.A * xp, s.Q.matrix());
  }
  EXPECT_LT((out.log_weight_history.back() - normalize_log(expect)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(LinearConsistency, ParticleMeansApproachKalman) {
  const LinearSSM s = two_dim_model();
  const NonlinearSSM n = s.as_nonlinear();
  const TwinExperiment twin = simulate_twin(n, 20, RngStream(26, 1));
  const auto kal = run_filter(FilterKind::kalman, n, &s, twin, 0, RngStream(26, 2));
  for (FilterKind kind : {FilterKind::sir, FilterKind::optimal, FilterKind::implicit}) {
    std::vector<double> err;
    for (std::size_t M : {100u, 1000u, 10000u}) {
      const auto log = run_filter(kind, n, &s, twin, M, RngStream(26, 3));
      double e = 0.0;
      for (std::size_t k = 0; k < log.size(); ++k) e += (log[k].estimate - kal[k].estimate).norm();
      err.push_back(e / log.size());
    }
    EXPECT_GT(err[0], err[1]) << to_string(kind);
    EXPECT_GT(err[1], err[2]) << to_string(kind);
  }
}

TEST(Exchangeability, PermutedEnsembleGivesSameEstimateAndWeights) {
  const LinearSSM s = two_dim_model();
  FilterState st = initialize_filter(s.x0, 64, RngStream(27));
  std::vector<Vector> perm = st.ensemble.samples();
  std::reverse(perm.begin(), perm.end());
  FilterState sp = st;
  sp.ensemble = WeightedEnsemble::uniform(perm);
  EXPECT_LT((st.ensemble.mean() - sp.ensemble.mean()).norm(), 1e-14);
  // The optimal increment depends on the particle alone.
  FilterOptions no_resample;
  no_resample.resample_fraction = 0.0;
  const Vector b = Vector::Constant(1, 0.2);
  const FilterState a = optimal_step(s, st, b, RngStream(28), no_resample);
  const FilterState c = optimal_step(s, sp, b, RngStream(28), no_resample);
  Vector la = a.log_weight_history.back(), lc = c.log_weight_history.back();
  std::sort(la.begin(), la.end());
  std::sort(lc.begin(), lc.end());
  EXPECT_LT((la - lc).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Concurrency, StepsIndependentOfThreadCount) {
  const NonlinearSSM n = cubic_observation_model(0.5, 0.2);
  FilterOptions one, four;
  four.threads = 4;
  const FilterState st = initialize_filter(n.x0, 300, RngStream(29));
  const Vector b = Vector::Constant(1, 1.3);
  for (int pass = 0; pass < 2; ++pass) {
    const FilterState a = pass == 0 ? sir_step(n, st, b, RngStream(30), one)
                                    : implicit_filter_step(n, st, b, RngStream(30), one);
    const FilterState c = pass == 0 ? sir_step(n, st, b, RngStream(30), four)
                                    : implicit_filter_step(n, st, b, RngStream(30), four);
    for (std::size_t j = 0; j < a.ensemble.size(); ++j) {
      ASSERT_EQ(a.ensemble.sample(j), c.ensemble.sample(j));
    }
    EXPECT_EQ(a.log_weight_history.back(), c.log_weight_history.back());
  }
}

TEST(RunLog, CsvHeader) {
  const NonlinearSSM n = cubic_observation_model(1.0, 1.0);
  const TwinExperiment twin = simulate_twin(n, 3, RngStream(31));
  const auto log = run_filter(FilterKind::sir, n, nullptr, twin, 20, RngStream(32));
  std::ostringstream os;
  write_run_log_csv(os, log);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "step,estimate_1,truth_1,m_eff,resampled");
}

TEST(RunFilter, KalmanAndOptimalNeedLinearModel) {
  const NonlinearSSM n = cubic_observation_model(1.0, 1.0);
  const TwinExperiment twin = simulate_twin(n, 3, RngStream(33));
  EXPECT_THROW(run_filter(FilterKind::optimal, n, nullptr, twin, 10, RngStream(34)), DimensionError);
  EXPECT_THROW(parse_filter_kind("enkf"), DimensionError);
}
