#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "fml/geometry/chart.hpp"
#include "fml/quadrature.hpp"

namespace fml {

/// Product quadrature on S^2 x X at a grid radius: Fejer latitude weights,
/// trapezoid in phi and along the fiber.
class ShellQuadrature {
 public:
  explicit ShellQuadrature(const FiberedChart& c)
      : chart_(&c), lat_(fejer_latitude_weights(c.ntheta())) {
    cell_ = c.dphi();
    for (int a = 0; a < c.fiber_dim(); ++a) cell_ *= c.dy(a);
  }

  /// Integral over S^2 x X of f at shell ir, unit-sphere measure.
  double unit_integral(const std::vector<double>& f, int ir) const {
    const FiberedChart& c = *chart_;
    double total = 0.0;
    for (int it = 0; it < c.ntheta(); ++it) {
      double row = 0.0;
      const std::size_t base = c.index(ir, it, 0, 0);
      for (std::size_t j = 0; j < static_cast<std::size_t>(c.nphi()) * c.nfiber(); ++j) row += f[base + j];
      total += lat_[it] * row;
    }
    return total * cell_;
  }

  /// Sphere-and-fiber mean of f at shell ir.
  double mean(const std::vector<double>& f, int ir) const {
    return unit_integral(f, ir) / (4.0 * std::numbers::pi * chart_->fiber_volume());
  }

  std::vector<double> mean_profile(const std::vector<double>& f) const {
    std::vector<double> out(chart_->nr());
    for (int ir = 0; ir < chart_->nr(); ++ir) out[ir] = mean(f, ir);
    return out;
  }

  double latitude_weight(int it) const { return lat_[it]; }

 private:
  const FiberedChart* chart_;
  std::vector<double> lat_;
  double cell_ = 1.0;
};

/// Area of the unit sphere S^{k-1}; only k = 3 is shipped.
inline double omega_k(int k) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * k) / std::tgamma(0.5 * k);
}

}  // namespace fml
