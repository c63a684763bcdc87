#include "isda/feasibility.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "isda/csv.hpp"
#include "isda/error.hpp"

namespace isda {

int effective_dimension(const Vector& eigenvalues, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw DimensionError("effective_dimension: eps must lie in (0, 1)");
  }
  const double total = eigenvalues.squaredNorm();
  if (!(total > 0.0)) {
    throw NumericalError("feasibility",
                         "effective dimension of an all-zero spectrum");
  }
  const double goal = (1.0 - eps) * total;
  double partial = 0.0;
  for (Index l = 0; l < eigenvalues.size(); ++l) {
    partial += eigenvalues[l] * eigenvalues[l];
    if (partial >= goal) return static_cast<int>(l + 1);
  }
  return static_cast<int>(eigenvalues.size());
}

int effective_dimension(const Spectrum& spectrum, double eps) {
  return effective_dimension(spectrum.eigenvalues, eps);
}

double GPFamily::kernel(double x, double y) const {
  const double d = x - y;
  return std::pow(std::numbers::pi, -0.25) / std::sqrt(L) *
         std::exp(-d * d / (2.0 * L * L));
}

SymMatrix gp_covariance_matrix(const GPFamily& fam) {
  if (!(fam.L > 0.0) || fam.m < 2) {
    throw DimensionError("gp_covariance_matrix: need L > 0 and m >= 2");
  }
  SymMatrix p(fam.m);
  const double h = fam.h();
  for (Index i = 0; i < fam.m; ++i) {
    for (Index j = i; j < fam.m; ++j) {
      p.set(i, j, fam.kernel(static_cast<double>(i + 1) * h,
                             static_cast<double>(j + 1) * h));
    }
  }
  return p;
}

namespace {

using Kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
constexpr unsigned kMaxDepth = 20;
constexpr double kQuadTol = 1e-10;

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = kQuadTol) {
  double err = 0.0;
  const double v = Kronrod::integrate(f, a, b, kMaxDepth, tol, &err);
  if (!std::isfinite(v) || err > 1e3 * tol * std::max(1.0, std::abs(v))) {
    std::ostringstream msg;
    msg << "quadrature on [" << a << ", " << b
        << "] did not converge (estimate " << v << ", error " << err
        << ")";
    throw NumericalError("feasibility", msg.str());
  }
  return v;
}

// Composite 15-point Kronrod rule on panels no wider than `width`.
double integrate_panels(const std::function<double(double)>& f, double a,
                        double b, double width) {
  if (!(b > a)) return 0.0;
  const auto panels = static_cast<int>(std::ceil((b - a) / width));
  const double step = (b - a) / panels;
  double v = 0.0;
  double err = 0.0;
  for (int i = 0; i < panels; ++i) {
    double e = 0.0;
    const double lo = a + step * i;
    const double hi = i + 1 == panels ? b : lo + step;
    v += Kronrod::integrate(f, lo, hi, 0, kQuadTol, &e);
    err += e;
  }
  if (!std::isfinite(v) || err > 10.0 * kQuadTol * std::abs(v)) {
    std::ostringstream msg;
    msg << "panel quadrature on [" << a << ", " << b << "] too coarse (error "
        << err << ")";
    throw NumericalError("feasibility", msg.str());
  }
  return v;
}

}  // namespace

double gp_operator_frobenius(double L) {
  if (!(L > 0.0)) throw DimensionError("gp_operator_frobenius: L must be > 0");
  const GPFamily fam{L, 2};
  // k^2 decays like exp(-d^2/L^2); beyond 10 L it is below e^{-100}.
  const double band = 10.0 * L;
  // Integrates over [a, b] with breakpoints so that every panel either
  // contains the peak at an end or is flat.
  auto piecewise = [&](const std::function<double(double)>& f, double a,
                       double b, std::vector<double> cuts, double tol) {
    cuts.push_back(a);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double v = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double lo = std::max(a, cuts[i]);
      const double hi = std::min(b, cuts[i + 1]);
      if (hi > lo) v += integrate(f, lo, hi, tol);
    }
    return v;
  };
  // Inner integral: fixed Gauss-Kronrod panels of width L/2 on each side of
  // the peak. The tails beyond the band are dropped.
  auto inner = [&](double x) {
    auto k2 = [&](double y) {
      const double k = fam.kernel(x, y);
      return k * k;
    };
    return integrate_panels(k2, std::max(0.0, x - band), x, 0.5 * L) +
           integrate_panels(k2, x, std::min(1.0, x + band), 0.5 * L);
  };
  return std::sqrt(piecewise(inner, 0.0, 1.0, {band, 1.0 - band}, kQuadTol));
}

double gp_energy(double L) {
  if (!(L > 0.0)) throw DimensionError("gp_energy: L must be > 0");
  const GPFamily fam{L, 2};
  auto k2 = [&](double y) {
    const double k = fam.kernel(0.0, y);
    return k * k;
  };
  // exp(-y^2/L^2) is below 1e-300 beyond 27 L.
  return integrate(k2, -40.0 * L, 0.0) + integrate(k2, 0.0, 40.0 * L);
}

GPClosedForms gp_closed_forms(double L) {
  const double tail = std::exp(-1.0 / (L * L)) - 1.0;
  const double erf_term = std::sqrt(std::numbers::pi) * std::erf(1.0 / L);
  GPClosedForms c;
  c.exact = std::erf(1.0 / L) + L * tail / std::sqrt(std::numbers::pi);
  c.pi_L_outside = std::numbers::pi * L * (tail + erf_term);
  c.pi_outside = std::numbers::pi * (L * tail + erf_term);
  return c;
}

GPNorms gp_operator_norms(const GPFamily& fam, double eps) {
  const SymMatrix p = gp_covariance_matrix(fam);
  JacobiOptions jo;
  jo.compute_vectors = false;
  const Spectrum s = jacobi_eigen(p, jo);
  GPNorms n;
  n.frob_discrete = fam.h() * s.eigenvalues.norm();
  n.frob_operator = gp_operator_frobenius(fam.L);
  n.eff_dim = effective_dimension(s, eps);
  return n;
}

GPSweepRow gp_sweep_row(const GPFamily& fam, double eps) {
  const GPNorms n = gp_operator_norms(fam, eps);
  return {fam.L, fam.h(), n.frob_discrete, n.frob_operator, n.eff_dim,
          gp_energy(fam.L)};
}

void write_gp_csv(std::ostream& out, std::span<const GPSweepRow> rows) {
  CsvWriter csv(out);
  csv.header({"L", "h", "frob_discrete", "frob_operator", "eff_dim", "energy"});
  for (const auto& r : rows) {
    csv.row({r.L, r.h, r.frob_discrete, r.frob_operator,
             static_cast<double>(r.eff_dim), r.energy});
  }
}

namespace {

// M R^{-1} for symmetric positive-definite R, via Cholesky.
Matrix right_solve(const Matrix& m, const Matrix& r, const char* what) {
  const CholeskyFactor c = cholesky_psd(r);
  if (!c.full_rank()) {
    throw NumericalError("feasibility", std::string(what) + " is singular");
  }
  return cholesky_solve(c, Matrix(m.transpose())).transpose();
}

}  // namespace

CollapseMatrices collapse_matrices(const LinearSSM& model, const SymMatrix& p) {
  const Matrix& a = model.A;
  const Matrix& h = model.H;
  const Matrix apa = a * p.matrix() * a.transpose();
  CollapseMatrices c;
  c.sigma_sir = right_solve(h * (model.Q.matrix() + apa) * h.transpose(),
                            model.R.matrix(), "R");
  c.sigma_opt = right_solve(
      h * apa * h.transpose(),
      h * model.Q.matrix() * h.transpose() + model.R.matrix(), "HQH^T + R");
  return c;
}

FeasibilityReport analyze_feasibility(const LinearSSM& model, double eps,
                                      double threshold) {
  model.validate();
  const SymMatrix p =
      riccati_steady_state(model.A, model.H, model.Q, model.R);
  FeasibilityReport rep;
  rep.epsilon = eps;
  rep.threshold = threshold;
  rep.p_frobenius = frobenius_norm(p);
  JacobiOptions jo;
  jo.compute_vectors = false;
  const Spectrum s = jacobi_eigen(p, jo);
  // A zero posterior covariance has no spread to count.
  rep.eff_dim = rep.p_frobenius > 0.0 ? effective_dimension(s, eps) : 1;
  const CollapseMatrices c = collapse_matrices(model, p);
  rep.sigma_sir_norm = frobenius_norm(c.sigma_sir);
  rep.sigma_opt_norm = frobenius_norm(c.sigma_opt);
  rep.feasible_in_principle = rep.p_frobenius <= threshold;
  rep.sir_ok = rep.sigma_sir_norm <= threshold;
  rep.opt_ok = rep.sigma_opt_norm <= threshold;
  return rep;
}

ModelProblemScalars model_problem_scalars(double q, double r) {
  if (q < 0.0 || !(r > 0.0)) {
    throw DimensionError("model problem needs q >= 0 and r > 0");
  }
  const double root = std::sqrt(q * q + 4.0 * q * r);
  ModelProblemScalars s;
  s.feasibility = (root - q) / 2.0;
  s.sir = (root + q) / (2.0 * r);
  s.optimal = (root - q) / (2.0 * (q + r));
  return s;
}

std::string to_string(Region region) {
  switch (region) {
    case Region::infeasible: return "infeasible";
    case Region::feasible_only: return "feasible_only";
    case Region::optimal_ok: return "optimal_ok";
    case Region::sir_ok: return "sir_ok";
  }
  return "unknown";
}

std::vector<ConeRow> cone_diagram(std::span<const double> q_grid,
                                  std::span<const double> r_grid,
                                  double threshold) {
  std::vector<ConeRow> rows;
  rows.reserve(q_grid.size() * r_grid.size());
  for (double q : q_grid) {
    for (double r : r_grid) {
      ConeRow row;
      row.q = q;
      row.r = r;
      row.scalars = model_problem_scalars(q, r);
      const bool feasible = row.scalars.feasibility <= threshold;
      const bool sir = feasible && row.scalars.sir <= threshold;
      const bool opt = feasible && row.scalars.optimal <= threshold;
      if (sir && !opt) {
        std::ostringstream msg;
        msg << "containment violated at q = " << q << ", r = " << r;
        throw NumericalError("feasibility", msg.str());
      }
      if (!feasible) {
        row.region = Region::infeasible;
      } else if (sir) {
        row.region = Region::sir_ok;
      } else if (opt) {
        row.region = Region::optimal_ok;
      } else {
        row.region = Region::feasible_only;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

void write_cone_csv(std::ostream& out, std::span<const ConeRow> rows) {
  CsvWriter csv(out);
  csv.header({"q", "r", "feas_scalar", "sir_scalar", "opt_scalar", "region"});
  for (const auto& row : rows) {
    std::string line = format_number(row.q) + "," + format_number(row.r) +
                       "," + format_number(row.scalars.feasibility) + "," +
                       format_number(row.scalars.sir) + "," +
                       format_number(row.scalars.optimal) + "," +
                       to_string(row.region);
    out << line << '\n';
  }
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0 && hi >= lo) || n == 0) {
    throw DimensionError("log_grid: need 0 < lo <= hi and n > 0");
  }
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = std::exp(a + (b - a) * static_cast<double>(i) /
                            static_cast<double>(n - 1));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

CollapseRun empirical_collapse(FilterKind kind, double q, double r, Index m,
                               std::size_t M, std::size_t steps,
                               std::size_t seeds, std::uint64_t base_seed,
                               const FilterOptions& options) {
  if (kind == FilterKind::kalman) {
    throw DimensionError("empirical_collapse: needs a particle filter");
  }
  const LinearSSM lin = model_problem(m, q, r);
  const NonlinearSSM model = lin.as_nonlinear();
  CollapseRun run;
  for (std::size_t s = 0; s < seeds; ++s) {
    const TwinExperiment twin =
        simulate_twin(model, steps, RngStream(base_seed, 2 * s));
    const auto log = run_filter(kind, model, &lin, twin, M,
                                RngStream(base_seed, 2 * s + 1), options);
    for (const auto& e : log) run.m_eff.push_back(e.m_eff);
  }
  std::vector<double> sorted = run.m_eff;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  run.median_m_eff =
      n == 0 ? 0.0
             : (n % 2 ? sorted[n / 2]
                      : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]));
  return run;
}

}  // namespace isda
