#pragma once

#include <cmath>
#include <vector>

#include "fml/error.hpp"
#include "fml/geometry/laplace.hpp"
#include "fml/sparse.hpp"

namespace fml {

struct SolverConfig {
  OuterCondition outer = OuterCondition::kRobin;
  double tol = 1e-10;
  int max_iter = 50000;
  int fit_begin = -1;  // shell window for decay fits; negative = default
  int fit_end = -1;
};

/// L u = Delta_g u - f u. The solve matrix is K + B + W f, symmetric and
/// positive definite when f >= 0 and B != 0.
struct EllipticOperator {
  LaplaceOperator laplace;
  std::vector<double> potential;
  CsrMatrix system;

  std::size_t size() const { return potential.size(); }

  /// Interior action of L (boundary diagonal excluded).
  std::vector<double> apply(const std::vector<double>& u) const {
    std::vector<double> ku;
    laplace.stiffness.multiply(u, ku);
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i)
      out[i] = -(ku[i] - laplace.boundary[i] * u[i]) / laplace.weights[i] - potential[i] * u[i];
    return out;
  }
};

inline EllipticOperator assemble_operator(const MetricField& metric, const std::vector<double>& potential,
                                          OuterCondition outer = OuterCondition::kRobin) {
  require(potential.size() == metric.chart->size(), ErrorKind::kDomain,
          "potential is not sampled on the metric chart");
  EllipticOperator op;
  op.laplace = assemble_laplace(metric, outer);
  op.potential = potential;
  op.system = op.laplace.stiffness;
  std::vector<double> wf(potential.size());
  for (std::size_t i = 0; i < wf.size(); ++i) wf[i] = op.laplace.weights[i] * potential[i];
  op.system.add_diagonal(wf);
  return op;
}

/// Smallest eigenvalue of the pencil (system, W) by inverse iteration.
inline double smallest_generalized_eigenvalue(const CsrMatrix& a, const std::vector<double>& w,
                                              int iterations = 12) {
  const std::size_t n = a.rows();
  std::vector<double> x(n, 1.0), y(n, 0.0), b(n), ax;
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += w[i] * x[i] * x[i];
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] /= norm;
      b[i] = w[i] * x[i];
    }
    a.multiply(x, ax);
    lambda = dot(x, ax);
    pcg(a, b, y, 1e-8, 20000);
    x = y;
  }
  return lambda;
}

}  // namespace fml
