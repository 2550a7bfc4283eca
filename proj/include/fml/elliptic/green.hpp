#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fml/elliptic/operator.hpp"
#include "fml/geometry/differentiation.hpp"
#include "fml/geometry/shells.hpp"
#include "fml/weighted/decay_fit.hpp"

namespace fml {

struct GreenField {
  std::size_t source = 0;
  ScalarField G;
  DecayFit fit;            // shell mean of G
  DecayFit gradient_fit;   // shell mean of |grad G|
  std::vector<double> profile;
  std::vector<double> gradient_profile;
  double min_value = 0.0;
  bool negativity_flag = false;
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Solves Delta_g G = -delta_p with a volume-normalized discrete delta, so
/// (K + B) G = e_p and sum_i W_i (Delta G)_i = -1 exactly.
inline GreenField green_function(const MetricField& metric, std::size_t source,
                                 const SolverConfig& cfg = {}) {
  const FiberedChart& c = *metric.chart;
  const NodeIndex idx = c.decompose(source);
  require(idx.ir >= 3 && idx.ir <= c.nr() - 4, ErrorKind::kDomain,
          "source must sit at least 3 shells inside the radial boundaries");
  require(cfg.outer != OuterCondition::kNeumann, ErrorKind::kDomain,
          "Green's function needs a Robin or Dirichlet outer condition");
  const LaplaceOperator op = assemble_laplace(metric, cfg.outer);
  std::vector<double> rhs(c.size(), 0.0), G(c.size(), 0.0);
  rhs[source] = 1.0;
  const SolveStats st = pcg(op.stiffness, rhs, G, cfg.tol, cfg.max_iter);
  if (!st.converged) fail(ErrorKind::kNumerical, "Green's function solve did not converge");

  GreenField out;
  out.source = source;
  out.iterations = st.iterations;
  out.residual_norm = st.relative_residual;
  const double gmax = *std::max_element(G.begin(), G.end());
  out.min_value = *std::min_element(G.begin(), G.end());
  out.negativity_flag = out.min_value < -1e-8 * gmax;

  const ShellQuadrature quad(c);
  out.profile = quad.mean_profile(G);
  const ChartDifferentiator d(metric.chart);
  const auto grad = d.gradient(G);
  std::vector<double> norm(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    double s = 0.0;
    for (int a = 0; a < c.n(); ++a) s += grad[a][i] * grad[a][i];
    norm[i] = std::sqrt(s);
  }
  out.gradient_profile = quad.mean_profile(norm);
  ShellRange win = default_fit_window(c.nr());
  if (cfg.fit_begin >= 0) win = {cfg.fit_begin, cfg.fit_end};
  out.fit = fit_decay(c.radii(), out.profile, win);
  out.gradient_fit = fit_decay(c.radii(), out.gradient_profile, win);
  out.G = ScalarField(metric.chart, std::move(G));
  return out;
}

struct RoughDecayResult {
  bool holds = false;
  double constant = 0.0;   // sup of profile * r^{k-2-eps} over the checked shells
  double tail_exponent = 0.0;
};

/// Checks profile <= C r^{2-k+eps} with a finite C on shells [begin, end):
/// the scaled profile profile * r^{k-2-eps} must not grow.
inline RoughDecayResult rough_decay_check(const std::vector<double>& radii,
                                          const std::vector<double>& profile, int k, double eps,
                                          ShellRange range) {
  std::vector<double> scaled(radii.size(), 0.0);
  RoughDecayResult res;
  for (int i = range.begin; i < range.end; ++i) {
    scaled[i] = profile[i] * std::pow(radii[i], k - 2 - eps);
    res.constant = std::max(res.constant, scaled[i]);
  }
  const DecayFit f = fit_decay(radii, scaled, range);
  res.tail_exponent = f.exponent;
  res.holds = f.exponent >= -1e-3;
  return res;
}

inline RoughDecayResult rough_decay_check(const GreenField& g, double eps) {
  const FiberedChart& c = *g.G.chart;
  ShellRange win = default_fit_window(c.nr());
  return rough_decay_check(c.radii(), g.profile, c.k(), eps, win);
}

/// Closed-form periodic Green's function of R^3 x S^1_L (unit flux),
/// G = (1/(4 pi L rho)) sinh(2 pi rho/L) / (cosh(2 pi rho/L) - cos(2 pi t/L)).
inline double periodic_green_closed_form(double rho, double t, double L) {
  const double a = 2.0 * std::numbers::pi / L;
  return std::sinh(a * rho) / (std::cosh(a * rho) - std::cos(a * t)) /
         (4.0 * std::numbers::pi * L * rho);
}

}  // namespace fml
