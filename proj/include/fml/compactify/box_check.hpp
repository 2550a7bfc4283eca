#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fml/error.hpp"
#include "fml/geometry/metric.hpp"

namespace fml {

struct FacePairReport {
  int axis = 0;
  double deviation_minus = 0.0;  // max |g - g_hat| on the face x^axis = -L/2
  double deviation_plus = 0.0;
  double mismatch = 0.0;         // max |g(+) - g(-)| between identified points
  bool ok = false;
};

struct BoxReport {
  double side = 0.0;
  double tol = 0.0;
  std::vector<FacePairReport> pairs;
  bool ok = false;
};

namespace detail {

inline ChartPoint chart_point_of(const std::array<double, kMaxDim>& x, int k) {
  ChartPoint p;
  double r2 = 0.0;
  for (int i = 0; i < k; ++i) r2 += x[i] * x[i];
  p.r = std::sqrt(r2);
  p.theta = std::acos(std::clamp(x[2] / p.r, -1.0, 1.0));
  p.phi = std::atan2(x[1], x[0]);
  if (p.phi < 0.0) p.phi += 2.0 * std::numbers::pi;
  return p;
}

}  // namespace detail

/// Checks that the metric restricted to the boundary of the cube
/// [-L/2, L/2]^k (times the fiber) is the product metric, face pair by face pair.
inline BoxReport periodic_box_check(const MetricField& metric, double side, int face_points = 9,
                                    double tol = 1e-12) {
  const FiberedChart& c = *metric.chart;
  const int k = c.k(), n = c.n(), m = c.fiber_dim();
  require(k == 3, ErrorKind::kDomain, "periodic_box_check supports k = 3 charts");
  require(side > 0.0 && face_points >= 2, ErrorKind::kDomain, "box side and face grid must be positive");
  const double h = 0.5 * side;
  require(h >= c.radius(0) && std::sqrt(double(k)) * h <= c.radius(c.nr() - 1), ErrorKind::kDomain,
          "box boundary must lie inside the chart");

  BoxReport rep;
  rep.side = side;
  rep.tol = tol;
  const SmallMatrix ident = SmallMatrix::Identity(n, n);
  for (int axis = 0; axis < k; ++axis) {
    FacePairReport fp;
    fp.axis = axis;
    const int a1 = (axis + 1) % k, a2 = (axis + 2) % k;
    for (int i = 0; i < face_points; ++i)
      for (int j = 0; j < face_points; ++j)
        for (std::size_t f = 0; f < c.nfiber(); ++f) {
          std::array<double, kMaxDim> x{};
          x[a1] = -h + side * i / (face_points - 1);
          x[a2] = -h + side * j / (face_points - 1);
          SmallMatrix g[2];
          for (int s = 0; s < 2; ++s) {
            x[axis] = s == 0 ? -h : h;
            ChartPoint p = detail::chart_point_of(x, k);
            for (int a = 0; a < m; ++a) p.fiber[a] = c.fiber_coord(f, a);
            g[s] = eval_metric(metric, p);
          }
          fp.deviation_minus = std::max(fp.deviation_minus, (g[0] - ident).cwiseAbs().maxCoeff());
          fp.deviation_plus = std::max(fp.deviation_plus, (g[1] - ident).cwiseAbs().maxCoeff());
          fp.mismatch = std::max(fp.mismatch, (g[1] - g[0]).cwiseAbs().maxCoeff());
        }
    fp.ok = fp.deviation_minus <= tol && fp.deviation_plus <= tol && fp.mismatch <= tol;
    rep.pairs.push_back(fp);
  }
  rep.ok = std::all_of(rep.pairs.begin(), rep.pairs.end(), [](const FacePairReport& p) { return p.ok; });
  return rep;
}

}  // namespace fml
