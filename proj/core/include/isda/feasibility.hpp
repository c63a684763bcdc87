#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "isda/filters.hpp"
#include "isda/linalg.hpp"

namespace isda {

/// Smallest l with sum_{j<=l} lambda_j^2 >= (1 - eps) sum_j lambda_j^2 over
/// a descending spectrum. Throws for eps outside (0,1) or an all-zero
/// spectrum.
int effective_dimension(const Vector& eigenvalues_descending, double eps);
int effective_dimension(const Spectrum& spectrum, double eps);

/// Stationary Gaussian covariance with unit energy,
/// k(x,x') = pi^{-1/4} L^{-1/2} exp(-(x-x')^2 / (2 L^2)), sampled on the grid
/// x_i = i h, h = 1/m.
struct GPFamily {
  double L = 0.1;
  Index m = 128;

  double h() const noexcept { return 1.0 / static_cast<double>(m); }
  double kernel(double x, double y) const;
};

SymMatrix gp_covariance_matrix(const GPFamily& fam);

/// sqrt of the double integral of k^2 over [0,1]^2 (adaptive Gauss-Kronrod,
/// relative tolerance 1e-10).
double gp_operator_frobenius(double L);
/// Integral of k(0,y)^2 over the real line; 1 for every L.
double gp_energy(double L);

/// Antiderivative evaluation of the double integral of k^2 over [0,1]^2,
/// and the two display forms it is compared against.
struct GPClosedForms {
  double exact = 0.0;            // erf(1/L) + L (e^{-1/L^2} - 1) / sqrt(pi)
  double pi_L_outside = 0.0;     // pi L ((e^{-1/L^2} - 1) + sqrt(pi) erf(1/L))
  double pi_outside = 0.0;       // pi (L (e^{-1/L^2} - 1) + sqrt(pi) erf(1/L))
};
GPClosedForms gp_closed_forms(double L);

struct GPNorms {
  double frob_operator = 0.0;
  double frob_discrete = 0.0;  // (sum_k (h lambda_k)^2)^{1/2}
  int eff_dim = 0;
};

GPNorms gp_operator_norms(const GPFamily& fam, double eps = 0.05);

struct GPSweepRow {
  double L = 0.0;
  double h = 0.0;
  double frob_discrete = 0.0;
  double frob_operator = 0.0;
  int eff_dim = 0;
  double energy = 0.0;
};

GPSweepRow gp_sweep_row(const GPFamily& fam, double eps = 0.05);
/// `L,h,frob_discrete,frob_operator,eff_dim,energy`.
void write_gp_csv(std::ostream& out, std::span<const GPSweepRow> rows);

struct CollapseMatrices {
  Matrix sigma_sir;  // H (Q + A P A^T) H^T R^{-1}
  Matrix sigma_opt;  // H A P A^T H^T (H Q H^T + R)^{-1}
};

CollapseMatrices collapse_matrices(const LinearSSM& model, const SymMatrix& p);

struct FeasibilityReport {
  double p_frobenius = 0.0;
  int eff_dim = 0;
  double epsilon = 0.05;
  double sigma_sir_norm = 0.0;
  double sigma_opt_norm = 0.0;
  double threshold = 1.0;
  bool feasible_in_principle = false;
  bool sir_ok = false;
  bool opt_ok = false;
};

FeasibilityReport analyze_feasibility(const LinearSSM& model,
                                      double eps = 0.05,
                                      double threshold = 1.0);

/// Per-component scalars of the model problem A = H = I, Q = qI, R = rI.
struct ModelProblemScalars {
  double feasibility = 0.0;  // (sqrt(q^2 + 4qr) - q) / 2
  double sir = 0.0;          // (sqrt(q^2 + 4qr) + q) / (2r)
  double optimal = 0.0;      // (sqrt(q^2 + 4qr) - q) / (2(q + r))
};

ModelProblemScalars model_problem_scalars(double q, double r);

enum class Region { infeasible, feasible_only, optimal_ok, sir_ok };
std::string to_string(Region region);

struct ConeRow {
  double q = 0.0;
  double r = 0.0;
  ModelProblemScalars scalars;
  Region region = Region::infeasible;
};

/// Region table over the (q, r) grids, ordered q-major. Throws if the
/// containment sir_ok within optimal_ok within feasible is violated.
std::vector<ConeRow> cone_diagram(std::span<const double> q_grid,
                                  std::span<const double> r_grid,
                                  double threshold = 1.0);

/// `q,r,feas_scalar,sir_scalar,opt_scalar,region`.
void write_cone_csv(std::ostream& out, std::span<const ConeRow> rows);

/// n log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

/// Particle-filter runs on the model problem; the median of M_eff over all
/// steps of all seeds.
struct CollapseRun {
  double median_m_eff = 0.0;
  std::vector<double> m_eff;  // every step of every seed
};

CollapseRun empirical_collapse(FilterKind kind, double q, double r, Index m,
                               std::size_t M, std::size_t steps,
                               std::size_t seeds, std::uint64_t base_seed,
                               const FilterOptions& options = {});

}  // namespace isda
