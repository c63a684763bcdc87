#include <benchmark/benchmark.h>

#include "isda/feasibility.hpp"
#include "isda/filters.hpp"
#include "isda/implicit.hpp"
#include "isda/linalg.hpp"
#include "isda/rng.hpp"

using namespace isda;

static void BM_JacobiGp(benchmark::State& state) {
  const SymMatrix p = gp_covariance_matrix({0.1, state.range(0)});
  JacobiOptions o;
  o.compute_vectors = false;
  for (auto _ : state) benchmark::DoNotOptimize(jacobi_eigen(p, o));
}
BENCHMARK(BM_JacobiGp)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_Riccati(benchmark::State& state) {
  const LinearSSM s = model_problem(state.range(0), 1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(riccati_steady_state(s.A, s.H, s.Q, s.R));
}
BENCHMARK(BM_Riccati)->Arg(1)->Arg(10)->Arg(50);

static void BM_ImplicitSample(benchmark::State& state) {
  const Index m = state.range(0);
  ObjectiveF f{[](const Vector& x) { return 0.5 * x.squaredNorm() + 0.1 * x.array().pow(4).sum(); },
               [](const Vector& x) -> Vector { return x + 0.4 * x.array().cube().matrix(); }, m};
  const MinResult min = minimize(f, Vector::Ones(m));
  RngStream rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(implicit_sample(f, min, rng));
}
BENCHMARK(BM_ImplicitSample)->Arg(2)->Arg(10)->Arg(50);

static void BM_Minimize(benchmark::State& state) {
  const Index m = state.range(0);
  ObjectiveF f{[](const Vector& x) { return 0.5 * x.squaredNorm() + 0.1 * x.array().pow(4).sum(); },
               [](const Vector& x) -> Vector { return x + 0.4 * x.array().cube().matrix(); }, m};
  for (auto _ : state) benchmark::DoNotOptimize(minimize(f, Vector::Ones(m)));
}
BENCHMARK(BM_Minimize)->Arg(2)->Arg(10)->Arg(50);

template <FilterKind kKind>
static void BM_FilterStep(benchmark::State& state) {
  const LinearSSM s = model_problem(state.range(0), 1.0, 1.0);
  const NonlinearSSM n = s.as_nonlinear();
  const FilterState start = initialize_filter(s.x0, 100, RngStream(2));
  const Vector b = Vector::Constant(s.obs_dim(), 0.5);
  for (auto _ : state) {
    FilterState st = start;
    if constexpr (kKind == FilterKind::sir) {
      benchmark::DoNotOptimize(sir_step(n, std::move(st), b, RngStream(3)));
    } else if constexpr (kKind == FilterKind::optimal) {
      benchmark::DoNotOptimize(optimal_step(s, std::move(st), b, RngStream(3)));
    } else {
      benchmark::DoNotOptimize(implicit_filter_step(n, std::move(st), b, RngStream(3)));
    }
  }
}
BENCHMARK(BM_FilterStep<FilterKind::sir>)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FilterStep<FilterKind::optimal>)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FilterStep<FilterKind::implicit>)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
