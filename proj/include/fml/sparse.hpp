#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <tuple>
#include <vector>

#include "fml/parallel.hpp"

namespace fml {

struct Triplet {
  std::uint32_t row;
  std::uint32_t col;
  double value;
};

/// Compressed sparse row matrix. Row products are evaluated in stored column
/// order, so results do not depend on threading.
class CsrMatrix {
 public:
  CsrMatrix() = default;

  /// Sums duplicate entries; the ordering is a total sort, hence deterministic.
  static CsrMatrix from_triplets(std::size_t n, std::vector<Triplet> t) {
    std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    CsrMatrix m;
    m.n_ = n;
    m.rowptr_.assign(n + 1, 0);
    for (std::size_t i = 0; i < t.size();) {
      std::size_t j = i;
      double v = 0.0;
      while (j < t.size() && t[j].row == t[i].row && t[j].col == t[i].col) v += t[j++].value;
      m.col_.push_back(t[i].col);
      m.val_.push_back(v);
      ++m.rowptr_[t[i].row + 1];
      i = j;
    }
    for (std::size_t r = 0; r < n; ++r) m.rowptr_[r + 1] += m.rowptr_[r];
    return m;
  }

  std::size_t rows() const { return n_; }
  std::size_t nonzeros() const { return val_.size(); }

  void multiply(const std::vector<double>& x, std::vector<double>& y) const {
    y.resize(n_);
    parallel_for(n_, [&](std::size_t r) {
      double s = 0.0;
      for (std::size_t p = rowptr_[r]; p < rowptr_[r + 1]; ++p) s += val_[p] * x[col_[p]];
      y[r] = s;
    });
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(n_, 0.0);
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t p = rowptr_[r]; p < rowptr_[r + 1]; ++p)
        if (col_[p] == r) d[r] += val_[p];
    return d;
  }

  /// Adds v to the diagonal in place (entries must already exist).
  void add_diagonal(const std::vector<double>& v) {
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t p = rowptr_[r]; p < rowptr_[r + 1]; ++p)
        if (col_[p] == r) val_[p] += v[r];
  }

  double entry(std::size_t r, std::size_t c) const {
    for (std::size_t p = rowptr_[r]; p < rowptr_[r + 1]; ++p)
      if (col_[p] == c) return val_[p];
    return 0.0;
  }

  double max_asymmetry() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < n_; ++r)
      for (std::size_t p = rowptr_[r]; p < rowptr_[r + 1]; ++p)
        worst = std::max(worst, std::abs(val_[p] - entry(col_[p], r)));
    return worst;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> rowptr_;
  std::vector<std::uint32_t> col_;
  std::vector<double> val_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite CSR matrix. x holds the initial guess on entry.
inline SolveStats pcg(const CsrMatrix& a, const std::vector<double>& b, std::vector<double>& x,
                      double tol = 1e-10, int max_iter = 20000) {
  const std::size_t n = a.rows();
  x.resize(n, 0.0);
  std::vector<double> inv_diag = a.diagonal();
  for (double& d : inv_diag) d = d != 0.0 ? 1.0 / d : 1.0;
  std::vector<double> r(n), z(n), p(n), ap(n);
  a.multiply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  const double bnorm = std::sqrt(dot(b, b));
  SolveStats stats;
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    stats.converged = true;
    return stats;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  for (int it = 0; it < max_iter; ++it) {
    const double rnorm = std::sqrt(dot(r, r));
    stats.relative_residual = rnorm / bnorm;
    stats.iterations = it;
    if (stats.relative_residual <= tol) {
      stats.converged = true;
      return stats;
    }
    a.multiply(p, ap);
    const double alpha = rz / dot(p, ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
      z[i] = inv_diag[i] * r[i];
    }
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  // recompute the true residual for the report
  a.multiply(x, ap);
  double rr = 0.0;
  for (std::size_t i = 0; i < n; ++i) rr += (b[i] - ap[i]) * (b[i] - ap[i]);
  stats.relative_residual = std::sqrt(rr) / bnorm;
  stats.iterations = max_iter;
  stats.converged = stats.relative_residual <= tol;
  return stats;
}

}  // namespace fml
