#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "fml/elliptic/operator.hpp"
#include "fml/geometry/differentiation.hpp"
#include "fml/geometry/golden.hpp"
#include "fml/geometry/laplace.hpp"
#include "fml/geometry/shells.hpp"
#include "fml/weighted/decay_fit.hpp"

namespace fml {

struct HarmonicOptions {
  double chi_radius = -1.0;  // chi = 0 below, 1 beyond twice this; negative = r_min / 2 (chi = 1 on the chart)
  double tol = 1e-12;
  int max_iter = 50000;
};

struct HarmonicCoordinates {
  ChartPtr chart;
  double chi_radius = 0.0;
  ScalarField chi;
  std::vector<ScalarField> y;  // y^i = chi x^i - u^i
  std::vector<ScalarField> u;
  double harmonic_residual = 0.0;  // max |Delta_g y^i| relative to max |Delta_g (chi x^i)|
  std::vector<DecayFit> decay_fits;  // shell mean of |d u^i|
  double decay_threshold = 0.0;      // tau - 0.1
  bool decay_ok = true;
  int iterations = 0;
};

/// Solves Delta_g u^i = Delta_g(chi x^i) with d_r u^i = 0 on the outer face
/// (the corrector tends to a bounded angular profile) and the additive
/// constant fixed by a zero mean on the outermost shell.
inline HarmonicCoordinates build_harmonic_coordinates(const MetricField& metric, const HarmonicOptions& opt = {}) {
  const FiberedChart& c = *metric.chart;
  const int k = c.k(), n = c.n();
  const double r0 = opt.chi_radius > 0.0 ? opt.chi_radius : 0.5 * c.radius(0);
  HarmonicCoordinates hc;
  hc.chart = metric.chart;
  hc.chi_radius = r0;
  hc.chi = ScalarField(metric.chart);
  for (std::size_t i = 0; i < c.size(); ++i)
    hc.chi[i] = smoothstep5(c.radius(static_cast<int>(i / c.shell_size())) / r0 - 1.0);

  const LaplaceOperator op = assemble_laplace(metric, OuterCondition::kNeumann);
  const MetricField flat = flat_metric(metric.chart);
  const LaplaceOperator op0 = assemble_laplace(flat, OuterCondition::kNeumann);
  // outer face conductance; chi x^i keeps its flux through it via a ghost
  // shell at r e^{ds}, while u^i has none
  double cell = c.ds() * c.dtheta() * c.dphi();
  for (int a = 0; a < c.fiber_dim(); ++a) cell *= c.dy(a);
  const double h = c.ds();
  std::vector<double> wtmp;
  const auto A = detail::chart_conductivity(metric, wtmp);
  const auto A0 = detail::chart_conductivity(flat, wtmp);
  auto discrete_minus_w_laplacian = [&](const LaplaceOperator& o, const std::vector<std::vector<double>>& cond,
                                        const std::vector<double>& f) {
    std::vector<double> out;
    o.stiffness.multiply(f, out);
    for (std::size_t j = c.index(c.nr() - 1, 0, 0, 0); j < c.size(); ++j)
      out[j] += cond[0][j] * std::exp(0.5 * h) * cell / (h * h) * f[j] * (1.0 - std::exp(h));
    return out;
  };
  const ChartDifferentiator d(metric.chart);
  const ShellQuadrature quad(c);
  hc.decay_threshold = metric.tau - 0.1;
  for (int i = 0; i < k; ++i) {
    std::vector<double> x(c.size()), cx(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) {
      x[j] = c.point(j).x[i];
      cx[j] = hc.chi[j] * x[j];
    }
    // the flat-metric discretization residual of x^i (zero in the continuum)
    // is removed from the source so the angular truncation of degree-one
    // harmonics does not accumulate into u^i
    std::vector<double> b = discrete_minus_w_laplacian(op, A, cx);
    const std::vector<double> b0 = discrete_minus_w_laplacian(op0, A0, x);
    for (std::size_t j = 0; j < c.size(); ++j) b[j] -= op.weights[j] / op0.weights[j] * hc.chi[j] * b0[j];
    double mean = 0.0;
    for (double v : b) mean += v;
    mean /= static_cast<double>(b.size());
    for (double& v : b) v -= mean;
    std::vector<double> u(c.size(), 0.0);
    const SolveStats st = pcg(op.stiffness, b, u, opt.tol, opt.max_iter);
    if (!st.converged) fail(ErrorKind::kNumerical, "harmonic coordinate corrector did not converge");
    hc.iterations += st.iterations;
    const double shift = quad.mean(u, c.nr() - 1);
    for (double& v : u) v -= shift;

    std::vector<double> ku;
    op.stiffness.multiply(u, ku);
    double res = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      res = std::max(res, std::abs(b[j] - ku[j]) / op.weights[j]);
      scale = std::max(scale, std::abs(b[j]) / op.weights[j]);
    }
    hc.harmonic_residual = std::max(hc.harmonic_residual, scale > 0.0 ? res / scale : res);

    const auto grad = d.gradient(u);
    std::vector<double> norm(c.size());
    for (std::size_t j = 0; j < c.size(); ++j) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += grad[a][j] * grad[a][j];
      norm[j] = std::sqrt(s);
    }
    const auto prof = quad.mean_profile(norm);
    const ShellRange win = default_fit_window(c.nr());
    bool positive = true;
    for (int s = win.begin; s < win.end; ++s) positive = positive && prof[s] > 1e-300;
    DecayFit fit;
    if (positive) {
      fit = fit_decay(c.radii(), prof, win);
    } else {
      fit.exponent = std::numeric_limits<double>::infinity();
    }
    hc.decay_ok = hc.decay_ok && fit.exponent >= hc.decay_threshold;
    hc.decay_fits.push_back(fit);

    ScalarField y(metric.chart, cx);
    for (std::size_t j = 0; j < c.size(); ++j) y[j] -= u[j];
    hc.y.push_back(std::move(y));
    hc.u.emplace_back(metric.chart, std::move(u));
  }
  return hc;
}

/// The chart coordinates x^i in the same container (u = 0, chi = 1).
inline HarmonicCoordinates chart_coordinates(const ChartPtr& chart) {
  const FiberedChart& c = *chart;
  HarmonicCoordinates hc;
  hc.chart = chart;
  hc.chi_radius = 0.5 * c.radius(0);
  hc.chi = ScalarField(chart, 1.0);
  for (int i = 0; i < c.k(); ++i) {
    ScalarField x(chart);
    for (std::size_t j = 0; j < c.size(); ++j) x[j] = c.point(j).x[i];
    hc.y.push_back(std::move(x));
    hc.u.emplace_back(chart);
    hc.decay_fits.push_back(DecayFit{0.0, std::numeric_limits<double>::infinity()});
  }
  return hc;
}

namespace detail {

/// chi(r) = s5(r/r0 - 1) and its first two radial derivatives.
inline std::array<double, 3> chi_profile(double r, double r0) {
  const double t = r / r0 - 1.0;
  if (t <= 0.0) return {0.0, 0.0, 0.0};
  if (t >= 1.0) return {1.0, 0.0, 0.0};
  return {smoothstep5(t), 30.0 * t * t * (1 - t) * (1 - t) / r0, 60.0 * t * (1 - t) * (1 - 2 * t) / (r0 * r0)};
}

}  // namespace detail

/// d y^i with the chi x^i part differentiated exactly and u^i by differences.
inline std::vector<std::vector<double>> coordinate_gradient(const HarmonicCoordinates& hc, int i,
                                                            int stride = 1) {
  const FiberedChart& c = *hc.chart;
  const int k = c.k();
  auto g = ChartDifferentiator(hc.chart, stride).gradient(hc.u[i].values);
  for (std::size_t j = 0; j < c.size(); ++j) {
    const Point p = c.point(j);
    const double r = p.radius();
    const auto ch = detail::chi_profile(r, hc.chi_radius);
    for (int a = 0; a < k; ++a) g[a][j] = (a == i ? ch[0] : 0.0) + p.x[i] * ch[1] * p.x[a] / r - g[a][j];
    for (int a = k; a < c.n(); ++a) g[a][j] = -g[a][j];
  }
  return g;
}

/// Cartesian Hessian of y^i, packed symmetric, split as coordinate_gradient.
inline std::vector<std::vector<double>> coordinate_hessian(const HarmonicCoordinates& hc, int i,
                                                           int stride = 1) {
  const FiberedChart& c = *hc.chart;
  const int k = c.k(), n = c.n();
  auto H = ChartDifferentiator(hc.chart, stride).hessian(hc.u[i].values);
  for (std::size_t j = 0; j < c.size(); ++j) {
    const Point p = c.point(j);
    const double r = p.radius();
    const auto ch = detail::chi_profile(r, hc.chi_radius);
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) {
        double v = 0.0;
        if (a < k && b < k) {
          const double xa = p.x[a] / r, xb = p.x[b] / r;
          v = ch[1] * ((a == i ? xb : 0.0) + (b == i ? xa : 0.0)) +
              p.x[i] * (ch[2] * xa * xb + ch[1] * ((a == b ? 1.0 : 0.0) - xa * xb) / r);
        }
        auto& e = H[sym_index(a, b, n)][j];
        e = v - e;
      }
  }
  return H;
}

}  // namespace fml
