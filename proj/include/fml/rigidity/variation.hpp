#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "fml/elliptic/conformal_solve.hpp"
#include "fml/geometry/conformal.hpp"
#include "fml/geometry/curvature.hpp"
#include "fml/geometry/golden.hpp"
#include "fml/geometry/laplace.hpp"
#include "fml/mass/functionals.hpp"

namespace fml {

struct FirstVariationProbe {
  std::vector<double> t_values;
  std::vector<double> masses;   // m(t) after the scalar-flattening rescale
  std::vector<double> A_values;
  double slope = 0.0;           // dm/dt at 0, least-squares polynomial fit
  double slope_error = 0.0;     // standard error of the slope
  double intercept = 0.0;
  double ricci_pairing = 0.0;   // int <Ric_g, h> dvol_g
  double predicted_slope = 0.0; // ricci_pairing / (omega_k Vol X)
  double linearized_slope = 0.0; // -int DSc(h) dvol / (omega_k Vol X), discrete
  double max_th = 0.0;          // max |t| |h|_inf
};

/// eta(r) = s5((r - a)/(b - a)) (1 - s5((r - c)/(d - c))): 0 below a and
/// above d, 1 on [b, c].
inline double bump_window(double r, double a, double b, double c, double d) {
  return smoothstep5((r - a) / (b - a)) * (1.0 - smoothstep5((r - c) / (d - c)));
}

/// h = eta Ric_g.
inline SymmetricTensorField ricci_direction(const MetricField& metric, const std::function<double(double)>& eta) {
  const FiberedChart& c = *metric.chart;
  const int n = c.n();
  SymmetricTensorField h(metric.chart, n);
  h.components = ricci(metric).ricci;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double e = eta(c.radius(static_cast<int>(i / c.shell_size())));
    for (auto& comp : h.components) comp[i] *= e;
  }
  return h;
}

/// int <Ric_g, h>_g dvol_g with the Laplacian node volumes.
inline double ricci_pairing(const MetricField& metric, const SymmetricTensorField& h) {
  const FiberedChart& c = *metric.chart;
  const int n = c.n();
  const PackedTensor ric = ricci(metric).ricci;
  std::vector<double> w;
  detail::chart_conductivity(metric, w);
  double total = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const SmallMatrix gi = metric.at(i).inverse();
    SmallMatrix R(n, n), H(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) {
        R(a, b) = R(b, a) = ric[sym_index(a, b, n)][i];
        H(a, b) = H(b, a) = h.components[sym_index(a, b, n)][i];
      }
    total += w[i] * (gi * R * gi * H).trace();
  }
  return total;
}

/// int DSc_g(h) dvol_g by a central difference in t.
inline double linearized_scalar_integral(const MetricField& metric, const SymmetricTensorField& h,
                                         double dt = 1e-4) {
  const FiberedChart& c = *metric.chart;
  MetricField plus = metric, minus = metric;
  plus.closed_form.reset();
  minus.closed_form.reset();
  for (std::size_t q = 0; q < metric.g.components.size(); ++q)
    for (std::size_t i = 0; i < c.size(); ++i) {
      plus.g.components[q][i] += dt * h.components[q][i];
      minus.g.components[q][i] -= dt * h.components[q][i];
    }
  const ScalarField sp = scalar_curvature(plus), sm = scalar_curvature(minus);
  std::vector<double> w;
  detail::chart_conductivity(metric, w);
  double total = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) total += w[i] * (sp.values[i] - sm.values[i]) / (2 * dt);
  return total;
}

/// m(t) for g_t = g + t h: flatten Sc_{g_t} with the conformal equation,
/// rescale, and take the extrapolated mass; the slope is fitted over t.
inline FirstVariationProbe mass_first_variation(const MetricField& metric, const SymmetricTensorField& h,
                                                const std::vector<double>& t_values,
                                                const SolverConfig& solver = {}) {
  const FiberedChart& c = *metric.chart;
  const int n = c.n();
  require(t_values.size() >= 2, ErrorKind::kDomain, "first variation needs at least two t values");
  require(h.dim == n && h.components.size() == metric.g.components.size(), ErrorKind::kDomain,
          "perturbation does not match the metric");
  const int last = c.nr() - 3;
  for (const auto& comp : h.components)
    for (std::size_t i = c.index(last, 0, 0, 0); i < c.size(); ++i)
      require(comp[i] == 0.0, ErrorKind::kDomain, "perturbation must vanish near the outer boundary");
  double hmax = 0.0;
  for (const auto& comp : h.components)
    for (double v : comp) hmax = std::max(hmax, std::abs(v));

  FirstVariationProbe probe;
  probe.t_values = t_values;
  const double cn = (n - 2) / (4.0 * (n - 1));
  for (double t : t_values) {
    probe.max_th = std::max(probe.max_th, std::abs(t) * hmax);
    MetricField gt = metric;
    gt.closed_form.reset();
    for (std::size_t q = 0; q < gt.g.components.size(); ++q)
      for (std::size_t i = 0; i < c.size(); ++i) gt.g.components[q][i] += t * h.components[q][i];
    if (!(min_eigenvalue(gt) > 0.0)) fail(ErrorKind::kNumerical, "g + t h is not positive definite");
    const ScalarField sc = scalar_curvature(gt);
    std::vector<double> f(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) f[i] = cn * sc.values[i];
    ConformalOptions opt;
    opt.solver = solver;
    const ConformalSolution sol = solve_conformal(gt, f, opt);
    probe.A_values.push_back(sol.A_flux);
    probe.masses.push_back(adm_mass(conformal_rescale(gt, sol.u).metric).extrapolated);
  }

  // polynomial in t of degree min(3, samples - 2), keeping one residual dof
  const int m = static_cast<int>(t_values.size());
  const int cols = std::max(2, std::min(4, m - 1));
  Eigen::MatrixXd X(m, cols);
  Eigen::VectorXd y(m);
  for (int i = 0; i < m; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = t_values[i];
    for (int p = 2; p < cols; ++p) X(i, p) = X(i, p - 1) * t_values[i];
    y(i) = probe.masses[i];
  }
  const Eigen::MatrixXd XtX = X.transpose() * X;
  require(std::abs(XtX.determinant()) > 0.0, ErrorKind::kDomain, "t values must not all coincide");
  const Eigen::VectorXd beta = XtX.ldlt().solve(X.transpose() * y);
  probe.intercept = beta(0);
  probe.slope = beta(1);
  if (m > cols) {
    const double rss = (y - X * beta).squaredNorm();
    probe.slope_error = std::sqrt(rss / (m - cols) * XtX.inverse()(1, 1));
  }
  probe.ricci_pairing = ricci_pairing(metric, h);
  probe.predicted_slope = probe.ricci_pairing / (omega_k(c.k()) * c.fiber_volume());
  probe.linearized_slope = -linearized_scalar_integral(metric, h) / (omega_k(c.k()) * c.fiber_volume());
  return probe;
}

}  // namespace fml
