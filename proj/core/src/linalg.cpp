#include "isda/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

namespace isda {

SymMatrix::SymMatrix(Index n) : m_(Matrix::Zero(n, n)) {}

SymMatrix SymMatrix::from_matrix(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("SymMatrix: matrix is not square");
  }
  SymMatrix s;
  s.m_ = 0.5 * (a + a.transpose());
  return s;
}

SymMatrix SymMatrix::identity(Index n) {
  SymMatrix s;
  s.m_ = Matrix::Identity(n, n);
  return s;
}

SymMatrix SymMatrix::diagonal(const Vector& d) {
  SymMatrix s;
  s.m_ = d.asDiagonal();
  return s;
}

void SymMatrix::set(Index i, Index j, double value) {
  m_(i, j) = value;
  m_(j, i) = value;
}

double frobenius_norm(const Matrix& p) { return p.norm(); }
double frobenius_norm(const SymMatrix& p) { return p.matrix().norm(); }

namespace {

double off_diagonal_norm(const std::vector<double>& a, Index n) {
  double s = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) s += a[i * n + j] * a[i * n + j];
  }
  return std::sqrt(2.0 * s);
}

}  // namespace

namespace {

// (x, y) <- (c x - s y, s x + c y) elementwise.
void rotate_rows(double* x, double* y, Index n, double c, double s) {
  for (Index i = 0; i < n; ++i) {
    const double g = x[i];
    const double h = y[i];
    x[i] = c * g - s * h;
    y[i] = s * g + c * h;
  }
}

}  // namespace

Spectrum jacobi_eigen(const SymMatrix& p, const JacobiOptions& options) {
  const Index n = p.dim();
  Spectrum out;
  if (n == 0) return out;

  // Row-major working copies; vt holds eigenvectors as rows so each rotation
  // touches two contiguous rows.
  std::vector<double> a(static_cast<std::size_t>(n * n));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) a[i * n + j] = p(i, j);
  }
  std::vector<double> vt;
  if (options.compute_vectors) {
    vt.assign(static_cast<std::size_t>(n * n), 0.0);
    for (Index i = 0; i < n; ++i) vt[i * n + i] = 1.0;
  }

  const double norm = frobenius_norm(p);
  const double target = options.relative_tolerance * norm;
  double off = off_diagonal_norm(a, n);

  // Round-robin ordering: each round rotates n/2 disjoint pairs at once, so a
  // round is one pass over the rows followed by one pass within each row.
  const Index players = n + (n % 2);
  std::vector<Index> ring(static_cast<std::size_t>(players));
  std::iota(ring.begin(), ring.end(), Index{0});
  struct Rotation {
    Index p, q;
    double c, s;
  };
  std::vector<Rotation> rots;
  rots.reserve(static_cast<std::size_t>(players / 2));

  int sweep = 0;
  while (off > target && norm > 0.0) {
    if (sweep == options.max_sweeps) {
      std::ostringstream msg;
      msg << "no convergence after " << sweep
          << " sweeps; off-diagonal residual " << off << " (target " << target
          << ")";
      throw NumericalError("jacobi", msg.str());
    }
    ++sweep;
    for (Index round = 0; round + 1 < players; ++round) {
      rots.clear();
      for (Index k = 0; k < players / 2; ++k) {
        Index ip = ring[static_cast<std::size_t>(k)];
        Index iq = ring[static_cast<std::size_t>(players - 1 - k)];
        if (ip >= n || iq >= n) continue;
        if (ip > iq) std::swap(ip, iq);
        const double apq = a[ip * n + iq];
        if (apq == 0.0) continue;
        const double app = a[ip * n + ip];
        const double aqq = a[iq * n + iq];
        // Negligible next to both diagonal entries: the eigenvalues move by
        // less than 1e-18 of the diagonal, so drop it.
        if (std::abs(apq) * 1e18 < std::abs(app) &&
            std::abs(apq) * 1e18 < std::abs(aqq)) {
          a[ip * n + iq] = 0.0;
          a[iq * n + ip] = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        rots.push_back({ip, iq, c, t * c});
      }
      if (!rots.empty()) {
        for (const auto& r : rots) {
          rotate_rows(&a[r.p * n], &a[r.q * n], n, r.c, r.s);
          if (options.compute_vectors) {
            rotate_rows(&vt[r.p * n], &vt[r.q * n], n, r.c, r.s);
          }
        }
        for (Index row = 0; row < n; ++row) {
          double* ar = &a[row * n];
          for (const auto& r : rots) {
            const double g = ar[r.p];
            const double h = ar[r.q];
            ar[r.p] = r.c * g - r.s * h;
            ar[r.q] = r.s * g + r.c * h;
          }
        }
        for (const auto& r : rots) {
          a[r.p * n + r.q] = 0.0;
          a[r.q * n + r.p] = 0.0;
        }
      }
      // Keep ring[0] fixed and rotate the rest by one place.
      std::rotate(ring.begin() + 1, ring.end() - 1, ring.end());
    }
    off = off_diagonal_norm(a, n);
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
    return a[x * n + x] > a[y * n + y];
  });
  out.eigenvalues.resize(n);
  if (options.compute_vectors) out.eigenvectors.resize(n, n);
  for (Index k = 0; k < n; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues[k] = a[src * n + src];
    if (options.compute_vectors) {
      for (Index r = 0; r < n; ++r) out.eigenvectors(r, k) = vt[src * n + r];
    }
  }
  out.sweeps = sweep;
  out.off_diagonal = off;
  return out;
}

CholeskyFactor cholesky_psd(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("cholesky: matrix is not square");
  }
  const Index n = a.rows();
  CholeskyFactor c;
  c.lower = Matrix::Zero(n, n);
  if (n == 0) {
    c.diagonal = true;
    return c;
  }

  const double scale = a.diagonal().cwiseAbs().maxCoeff();
  const double pivot_tol =
      std::max(1e-14 * scale, std::numeric_limits<double>::min());
  const double residual_tol = 1e-8 * std::max(scale, 1e-300);

  bool is_diagonal = true;
  for (Index j = 0; j < n && is_diagonal; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (i != j && a(i, j) != 0.0) {
        is_diagonal = false;
        break;
      }
    }
  }

  if (is_diagonal) {
    c.diagonal = true;
    for (Index j = 0; j < n; ++j) {
      const double d = a(j, j);
      if (d < -pivot_tol) {
        throw NumericalError("cholesky",
                             "matrix is not positive semi-definite");
      }
      if (d > pivot_tol) {
        c.lower(j, j) = std::sqrt(d);
        ++c.rank;
      }
    }
    return c;
  }

  Matrix& l = c.lower;
  for (Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d > pivot_tol) {
      const double ljj = std::sqrt(d);
      l(j, j) = ljj;
      for (Index i = j + 1; i < n; ++i) {
        l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
      }
      ++c.rank;
    } else if (d < -pivot_tol * static_cast<double>(n)) {
      std::ostringstream msg;
      msg << "matrix is not positive semi-definite (pivot " << d
          << " at column " << j << ")";
      throw NumericalError("cholesky", msg.str());
    } else {
      // Zero pivot: the remaining column of the Schur complement must vanish.
      for (Index i = j + 1; i < n; ++i) {
        const double rem =
            a(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
        if (std::abs(rem) > residual_tol) {
          throw NumericalError("cholesky",
                               "matrix is not positive semi-definite");
        }
      }
    }
  }
  return c;
}

namespace {

void require_full_rank(const CholeskyFactor& c) {
  if (!c.full_rank()) {
    throw NumericalError("cholesky",
                         "solve with a singular (rank-deficient) factor");
  }
}

}  // namespace

Vector forward_solve(const CholeskyFactor& c, const Vector& b) {
  require_full_rank(c);
  if (b.size() != c.dim()) throw DimensionError("forward_solve: size mismatch");
  if (c.diagonal) return b.cwiseQuotient(c.lower.diagonal());
  return c.lower.triangularView<Eigen::Lower>().solve(b);
}

Vector cholesky_solve(const CholeskyFactor& c, const Vector& b) {
  require_full_rank(c);
  if (b.size() != c.dim()) {
    throw DimensionError("cholesky_solve: size mismatch");
  }
  if (c.diagonal) return b.cwiseQuotient(c.lower.diagonal().cwiseAbs2());
  Vector y = c.lower.triangularView<Eigen::Lower>().solve(b);
  return c.lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix cholesky_solve(const CholeskyFactor& c, const Matrix& b) {
  require_full_rank(c);
  if (b.rows() != c.dim()) {
    throw DimensionError("cholesky_solve: size mismatch");
  }
  if (c.diagonal) {
    return c.lower.diagonal().cwiseAbs2().cwiseInverse().asDiagonal() * b;
  }
  Matrix y = c.lower.triangularView<Eigen::Lower>().solve(b);
  return c.lower.transpose().triangularView<Eigen::Upper>().solve(y);
}

double log_det(const CholeskyFactor& c) {
  if (!c.full_rank()) return -std::numeric_limits<double>::infinity();
  return 2.0 * c.lower.diagonal().array().log().sum();
}

Vector lower_times(const CholeskyFactor& c, const Vector& v) {
  if (c.diagonal) return c.lower.diagonal().cwiseProduct(v);
  return c.lower.triangularView<Eigen::Lower>() * v;
}

SymMatrix kalman_covariance_update(const Matrix& a, const Matrix& h,
                                   const SymMatrix& q, const SymMatrix& r,
                                   const SymMatrix& p) {
  const Index m = a.rows();
  if (a.cols() != m || p.dim() != m || q.dim() != m || h.cols() != m ||
      r.dim() != h.rows()) {
    throw DimensionError("kalman_covariance_update: inconsistent dimensions");
  }
  const Matrix x = a * p.matrix() * a.transpose() + q.matrix();
  const Matrix hx = h * x;
  const Matrix s = hx * h.transpose() + r.matrix();
  const CholeskyFactor sc = cholesky_psd(s);
  if (!sc.full_rank()) {
    throw NumericalError("kalman", "singular innovation covariance");
  }
  // K^T = S^{-1} H X, so (I - K H) X = X - (H X)^T S^{-1} (H X).
  const Matrix kt = cholesky_solve(sc, hx);
  return SymMatrix::from_matrix(x - hx.transpose() * kt);
}

SymMatrix riccati_steady_state(const Matrix& a, const Matrix& h,
                               const SymMatrix& q, const SymMatrix& r,
                               const RiccatiOptions& options) {
  SymMatrix p = q;
  double residual = std::numeric_limits<double>::infinity();
  for (long it = 0; it < options.max_iters; ++it) {
    SymMatrix next = kalman_covariance_update(a, h, q, r, p);
    residual = (next.matrix() - p.matrix()).norm();
    const double scale = std::max(1.0, frobenius_norm(next));
    p = std::move(next);
    if (!std::isfinite(residual)) break;
    if (residual < options.tolerance * scale) return p;
  }
  std::ostringstream msg;
  msg << "no convergence after " << options.max_iters
      << " iterations; residual " << residual;
  throw RiccatiError(msg.str(), p, residual);
}

}  // namespace isda
