#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <optional>
#include <string>

#include "json.hpp"

#include "fml/error.hpp"
#include "fml/geometry/chart.hpp"
#include "fml/geometry/fields.hpp"
#include "fml/parallel.hpp"

namespace fml {

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

/// Analytic evaluator attached to registry metrics.
struct ClosedForm {
  std::string name;
  nlohmann::json params;
  std::function<SmallMatrix(const Point&)> eval;
};

/// Metric g = g_hat + h sampled on a chart, Cartesian product frame.
struct MetricField {
  ChartPtr chart;
  SymmetricTensorField g;
  double tau = 1.0;
  std::optional<ClosedForm> closed_form;

  int dim() const { return g.dim; }

  SmallMatrix at(std::size_t node) const {
    const int n = g.dim;
    SmallMatrix m(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) m(a, b) = m(b, a) = g.at(node, a, b);
    return m;
  }
};

/// Samples a closed-form metric on every chart node.
inline MetricField sample_metric(const ChartPtr& chart, const ClosedForm& form, double tau) {
  const int n = chart->n();
  MetricField out{chart, SymmetricTensorField(chart, n), tau, form};
  parallel_for(chart->size(), [&](std::size_t i) {
    const SmallMatrix m = form.eval(chart->point(i));
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) out.g(a, b)[i] = m(a, b);
  });
  return out;
}

/// Product metric g_hat (identity in the Cartesian product frame).
inline MetricField flat_metric(const ChartPtr& chart) {
  ClosedForm form{"flat_product", nlohmann::json::object(),
                  [n = chart->n()](const Point&) -> SmallMatrix {
                    return SmallMatrix::Identity(n, n);
                  }};
  return sample_metric(chart, form, 1.0);
}

namespace detail {

/// Bracketing index and weight along a uniform periodic axis.
inline void periodic_bracket(double x, double h, int count, int& i0, double& w) {
  double t = x / h;
  t -= count * std::floor(t / count);
  i0 = static_cast<int>(std::floor(t));
  w = t - i0;
  i0 %= count;
}

}  // namespace detail

/// Metric at an arbitrary chart point. Exact through the closed form when
/// present, otherwise multilinear in (log r, theta, phi, fiber).
inline SmallMatrix eval_metric(const MetricField& metric, const ChartPoint& p) {
  const FiberedChart& c = *metric.chart;
  const double tol = 1e-12 * c.radial_spec().r_max;
  require(p.r >= c.radius(0) - tol && p.r <= c.radius(c.nr() - 1) + tol, ErrorKind::kDomain,
          "point outside the chart hull: extrapolation refused");
  if (metric.closed_form) return metric.closed_form->eval(c.to_point(p));

  const int n = metric.dim();
  // radial bracket in s
  double ts = (std::log(p.r) - c.s(0)) / c.ds();
  int ir = std::clamp(static_cast<int>(std::floor(ts)), 0, c.nr() - 2);
  const double wr = std::clamp(ts - ir, 0.0, 1.0);

  // latitude bracket; nodes sit at (j + 1/2) dtheta, the pole ghost maps
  // j = -1 to (0, phi + pi) and j = n_theta to (n_theta - 1, phi + pi)
  double theta = std::clamp(p.theta, 0.0, std::numbers::pi);
  const double tt = theta / c.dtheta() - 0.5;
  const int jt = static_cast<int>(std::floor(tt));
  const double wt = tt - jt;

  int ip0 = 0;
  double wp = 0.0;
  detail::periodic_bracket(p.phi, c.dphi(), c.nphi(), ip0, wp);

  const int m = c.fiber_dim();
  std::array<int, kMaxDim> f0{};
  std::array<double, kMaxDim> wf{};
  for (int a = 0; a < m; ++a) detail::periodic_bracket(p.fiber[a], c.dy(a), c.fiber().counts[a], f0[a], wf[a]);

  SmallMatrix out = SmallMatrix::Zero(n, n);
  const int corners = 1 << (3 + m);
  for (int mask = 0; mask < corners; ++mask) {
    double w = 1.0;
    const int dr = mask & 1;
    const int dt = (mask >> 1) & 1;
    const int dp = (mask >> 2) & 1;
    w *= dr ? wr : 1.0 - wr;
    w *= dt ? wt : 1.0 - wt;
    w *= dp ? wp : 1.0 - wp;
    int it = jt + dt;
    int ip = (ip0 + dp) % c.nphi();
    if (it < 0 || it >= c.ntheta()) {
      it = it < 0 ? -1 - it : 2 * c.ntheta() - 1 - it;
      ip = (ip + c.nphi() / 2) % c.nphi();
    }
    std::size_t f = 0;
    for (int a = 0; a < m; ++a) {
      const int dfa = (mask >> (3 + a)) & 1;
      w *= dfa ? wf[a] : 1.0 - wf[a];
      f += static_cast<std::size_t>((f0[a] + dfa) % c.fiber().counts[a]) * c.fiber_stride(a);
    }
    if (w == 0.0) continue;
    out += w * metric.at(c.index(ir + dr, it, ip, f));
  }
  return out;
}

/// Smallest eigenvalue over all nodes; positive definiteness probe.
inline double min_eigenvalue(const MetricField& metric) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < metric.chart->size(); ++i) {
    Eigen::SelfAdjointEigenSolver<SmallMatrix> es(metric.at(i), Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()(0));
  }
  return lo;
}

/// max |g - g_hat| over the nodes of shell ir.
inline double shell_deviation(const MetricField& metric, int ir) {
  const FiberedChart& c = *metric.chart;
  const int n = metric.dim();
  double dev = 0.0;
  const std::size_t base = c.index(ir, 0, 0, 0);
  for (std::size_t i = base; i < base + c.shell_size(); ++i)
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b)
        dev = std::max(dev, std::abs(metric.g.at(i, a, b) - (a == b ? 1.0 : 0.0)));
  return dev;
}

}  // namespace fml
