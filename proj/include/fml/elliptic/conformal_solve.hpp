#pragma once

#include <cmath>
#include <vector>

#include "fml/elliptic/operator.hpp"
#include "fml/geometry/shells.hpp"
#include "fml/weighted/decay_fit.hpp"

namespace fml {

struct ConformalSolution {
  ScalarField u;
  double A = 0.0;         // reported value (flux route)
  double A_flux = 0.0;    // C int f u dvol
  double A_fit = 0.0;     // R (1 - mean u) extrapolated over the two outermost fit shells
  DecayFit decay;         // fit of the shell mean of (1 - u)
  bool decay_valid = false;
  int iterations = 0;
  double residual_norm = 0.0;
  double f_minus_norm = 0.0;  // ||f_-||_{L^{n/2}}
  std::vector<double> profile;  // shell mean of 1 - u
};

struct ConformalOptions {
  SolverConfig solver;
  double support_radius = -1.0;  // f must vanish beyond; negative skips the check
  double epsilon0 = -1.0;        // smallness threshold for ||f_-||; negative skips
  double far_value = 1.0;
};

/// Calibration constant of the flux route: 1 / ((k-2) omega_k Vol(X)).
inline double flux_constant(const FiberedChart& c) {
  return 1.0 / ((c.k() - 2) * omega_k(c.k()) * c.fiber_volume());
}

/// ||f_-||_{L^{n/2}} in the metric volume.
inline double negative_part_norm(const std::vector<double>& f, const std::vector<double>& w, int n) {
  const double p = 0.5 * n;
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] < 0.0) s += w[i] * std::pow(-f[i], p);
  return std::pow(s, 1.0 / p);
}

/// Extrapolated amplitude A from a(R) = R^{k-2}(1 - u) = A + b/R on two shells.
inline double two_shell_amplitude(const std::vector<double>& radii, const std::vector<double>& one_minus_u,
                                  int i1, int i2, int k) {
  const double r1 = radii[i1], r2 = radii[i2];
  const double a1 = std::pow(r1, k - 2) * one_minus_u[i1];
  const double a2 = std::pow(r2, k - 2) * one_minus_u[i2];
  return (r2 * a2 - r1 * a1) / (r2 - r1);
}

/// Solves Delta_g u - f u = 0 with u -> far_value at the outer boundary.
inline ConformalSolution solve_conformal(const MetricField& metric, const std::vector<double>& f,
                                         const ConformalOptions& opt = {}) {
  const FiberedChart& c = *metric.chart;
  if (opt.support_radius > 0.0)
    for (std::size_t i = 0; i < f.size(); ++i)
      if (f[i] != 0.0 && c.radius(c.decompose(i).ir) > opt.support_radius)
        fail(ErrorKind::kDomain, "potential is not compactly supported inside the declared radius");
  require(opt.solver.outer != OuterCondition::kNeumann, ErrorKind::kDomain,
          "conformal solve needs a Robin or Dirichlet outer condition");
  const EllipticOperator op = assemble_operator(metric, f, opt.solver.outer);
  ConformalSolution sol;
  sol.f_minus_norm = negative_part_norm(f, op.laplace.weights, c.n());
  if (opt.epsilon0 > 0.0 && sol.f_minus_norm >= opt.epsilon0)
    fail(ErrorKind::kNumerical, "||f_-|| exceeds the smallness threshold epsilon0");

  std::vector<double> rhs(c.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = op.laplace.boundary[i] * opt.far_value;
  std::vector<double> u(c.size(), opt.far_value);
  const SolveStats st = pcg(op.system, rhs, u, opt.solver.tol, opt.solver.max_iter);
  if (!st.converged) fail(ErrorKind::kNumerical, "conformal solve did not converge");
  for (double v : u)
    if (!(v > 0.0)) fail(ErrorKind::kNumerical, "solution lost positivity (epsilon0 violated)");
  sol.iterations = st.iterations;
  sol.residual_norm = st.relative_residual;

  double flux = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) flux += op.laplace.weights[i] * f[i] * u[i];
  sol.A_flux = flux_constant(c) * flux;
  sol.A = sol.A_flux;

  const ShellQuadrature quad(c);
  std::vector<double> v(c.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = opt.far_value - u[i];
  sol.profile = quad.mean_profile(v);
  ShellRange win = default_fit_window(c.nr());
  if (opt.solver.fit_begin >= 0) win = {opt.solver.fit_begin, opt.solver.fit_end};
  sol.A_fit = two_shell_amplitude(c.radii(), sol.profile, win.end - 2, win.end - 1, c.k());
  bool positive = true;
  for (int i = win.begin; i < win.end; ++i) positive = positive && sol.profile[i] > 0.0;
  if (positive) {
    sol.decay = fit_decay(c.radii(), sol.profile, win);
    sol.decay_valid = true;
  }
  sol.u = ScalarField(metric.chart, std::move(u));
  return sol;
}

}  // namespace fml
