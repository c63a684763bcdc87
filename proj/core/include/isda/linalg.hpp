#pragma once

#include <Eigen/Core>

#include "isda/error.hpp"

namespace isda {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Dense symmetric matrix. The only mutator writes both (i,j) and (j,i), so
/// the stored entries are exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Index n);

  /// Symmetrizes as (a + a^T)/2. Throws DimensionError if a is not square.
  static SymMatrix from_matrix(const Matrix& a);
  static SymMatrix identity(Index n);
  static SymMatrix diagonal(const Vector& d);

  Index dim() const noexcept { return m_.rows(); }
  double operator()(Index i, Index j) const { return m_(i, j); }
  void set(Index i, Index j, double value);

  const Matrix& matrix() const noexcept { return m_; }
  operator const Matrix&() const noexcept { return m_; }

 private:
  Matrix m_;
};

/// Eigenvalues sorted descending; eigenvectors (columns) present only when
/// requested.
struct Spectrum {
  Vector eigenvalues;
  Matrix eigenvectors;
  int sweeps = 0;
  double off_diagonal = 0.0;  // Frobenius norm of the remaining off-diagonal
};

struct JacobiOptions {
  bool compute_vectors = true;
  int max_sweeps = 100;
  double relative_tolerance = 1e-12;  // off-diagonal vs ||P||_F
};

double frobenius_norm(const Matrix& p);
double frobenius_norm(const SymMatrix& p);

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
/// relative_tolerance * ||P||_F. Throws NumericalError on non-convergence,
/// reporting the residual.
Spectrum jacobi_eigen(const SymMatrix& p, const JacobiOptions& options = {});

/// Lower-triangular factor of a positive semi-definite matrix. Columns whose
/// pivot vanishes are zero, so rank < n signals a degenerate matrix.
struct CholeskyFactor {
  Matrix lower;
  Index rank = 0;
  bool diagonal = false;  // input was diagonal; solves run in O(n)

  Index dim() const noexcept { return lower.rows(); }
  bool full_rank() const noexcept { return rank == lower.rows(); }
};

/// Throws NumericalError if the matrix is not positive semi-definite.
CholeskyFactor cholesky_psd(const Matrix& a);

/// Solves L y = b (forward substitution). Requires a full-rank factor.
Vector forward_solve(const CholeskyFactor& c, const Vector& b);
/// Solves A x = b with A = L L^T.
Vector cholesky_solve(const CholeskyFactor& c, const Vector& b);
Matrix cholesky_solve(const CholeskyFactor& c, const Matrix& b);
/// log det(A) = 2 sum log L_ii; -inf for a rank-deficient factor.
double log_det(const CholeskyFactor& c);
/// L * v, exploiting the diagonal flag.
Vector lower_times(const CholeskyFactor& c, const Vector& v);

/// One Kalman covariance cycle: X = A P A^T + Q, K = X H^T (H X H^T + R)^-1,
/// returns (I - K H) X. The gain is formed through a Cholesky solve.
SymMatrix kalman_covariance_update(const Matrix& a, const Matrix& h,
                                   const SymMatrix& q, const SymMatrix& r,
                                   const SymMatrix& p);

struct RiccatiOptions {
  long max_iters = 1'000'000;
  double tolerance = 1e-12;  // ||P_new - P||_F < tol * max(1, ||P||_F)
};

class RiccatiError : public NumericalError {
 public:
  RiccatiError(const std::string& message, SymMatrix last, double residual)
      : NumericalError("riccati", message),
        last_(std::move(last)),
        residual_(residual) {}
  const SymMatrix& last_iterate() const noexcept { return last_; }
  double residual() const noexcept { return residual_; }

 private:
  SymMatrix last_;
  double residual_;
};

/// Steady-state posterior covariance of the linear filter, found by
/// iterating kalman_covariance_update from P0 = Q.
SymMatrix riccati_steady_state(const Matrix& a, const Matrix& h,
                               const SymMatrix& q, const SymMatrix& r,
                               const RiccatiOptions& options = {});

}  // namespace isda
