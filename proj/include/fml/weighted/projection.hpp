#pragma once

#include <utility>
#include <vector>

#include "fml/geometry/fields.hpp"

namespace fml {

/// Fiber average at each (r, theta, phi) cell; the periodic trapezoid rule
/// reduces to the plain mean on a uniform torus grid.
inline std::vector<double> fiber_mean_values(const ScalarField& f) {
  const FiberedChart& c = *f.chart;
  const std::size_t nf = c.nfiber(), cells = c.size() / nf;
  std::vector<double> mean(cells);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double s = 0.0;
    for (std::size_t fi = 0; fi < nf; ++fi) s += f.values[cell * nf + fi];
    mean[cell] = s / static_cast<double>(nf);
  }
  return mean;
}

/// (Pi_0 f, Pi_perp f).
inline std::pair<ScalarField, ScalarField> project_fiber_mean(const ScalarField& f) {
  const FiberedChart& c = *f.chart;
  const std::size_t nf = c.nfiber();
  const auto mean = fiber_mean_values(f);
  ScalarField m(f.chart), perp(f.chart);
  for (std::size_t i = 0; i < f.size(); ++i) {
    m.values[i] = mean[i / nf];
    perp.values[i] = f.values[i] - m.values[i];
  }
  return {std::move(m), std::move(perp)};
}

}  // namespace fml
