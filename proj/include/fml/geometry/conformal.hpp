#pragma once

#include <cmath>
#include <vector>

#include "fml/error.hpp"
#include "fml/geometry/curvature.hpp"
#include "fml/geometry/laplace.hpp"
#include "fml/weighted/decay_fit.hpp"

namespace fml {

struct ConformalRescale {
  MetricField metric;     // u^{4/(n-2)} g
  ScalarField predicted;  // 4(n-1)/(n-2) u^{-(n+2)/(n-2)} (-Delta_g u + (n-2)/(4(n-1)) Sc_g u)
};

inline ConformalRescale conformal_rescale(const MetricField& g, const ScalarField& u) {
  const FiberedChart& c = *g.chart;
  const int n = c.n();
  for (double v : u.values) require(v > 0.0, ErrorKind::kDomain, "conformal factor must be positive");
  const double expo = 4.0 / (n - 2);
  ConformalRescale out{g, ScalarField(g.chart)};
  out.metric.closed_form.reset();
  for (auto& comp : out.metric.g.components)
    for (std::size_t i = 0; i < comp.size(); ++i) comp[i] *= std::pow(u.values[i], expo);
  const ScalarField lap = laplace_beltrami(g, u);
  const ScalarField sc = scalar_curvature(g);
  const double cn = (n - 2) / (4.0 * (n - 1));
  for (std::size_t i = 0; i < c.size(); ++i)
    out.predicted.values[i] = (1.0 / cn) * std::pow(u.values[i], -(n + 2.0) / (n - 2)) *
                              (-lap.values[i] + cn * sc.values[i] * u.values[i]);
  return out;
}

/// Fitted decay of max |g - g_hat| per shell over the default window.
inline DecayFit decay_audit(const MetricField& metric) {
  const FiberedChart& c = *metric.chart;
  std::vector<double> dev(c.nr());
  for (int ir = 0; ir < c.nr(); ++ir) dev[ir] = shell_deviation(metric, ir);
  return fit_decay(c.radii(), dev);
}

/// Shells whose curvature values use only centered stencils of the second
/// derivative (two shells dropped at each radial end).
inline bool interior_shell(const FiberedChart& c, int ir) { return ir >= 2 && ir <= c.nr() - 3; }

}  // namespace fml
