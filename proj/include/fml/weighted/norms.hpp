#pragma once

#include <cmath>
#include <vector>

#include "fml/error.hpp"
#include "fml/geometry/differentiation.hpp"
#include "fml/geometry/fields.hpp"
#include "fml/weighted/projection.hpp"

namespace fml {

struct WeightedNormSpec {
  double delta = 0.0;
  double epsilon = 0.0;
  double compact_cut = 0.0;
};

/// Flat product volume of each node cell, r^3 sin(theta) ds dtheta dphi dy.
inline std::vector<double> flat_volume_weights(const FiberedChart& c) {
  double cell = c.ds() * c.dtheta() * c.dphi();
  for (int a = 0; a < c.fiber_dim(); ++a) cell *= c.dy(a);
  std::vector<double> w(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const NodeIndex idx = c.decompose(i);
    const double r = c.radius(idx.ir);
    w[i] = r * r * r * c.sin_theta(idx.it) * cell;
  }
  return w;
}

namespace detail {
inline double weighted_sum(const FiberedChart& c, const std::vector<double>& f,
                           const std::vector<double>& w, double delta, double cut) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double r = c.radius(c.decompose(i).ir);
    const double weight = r <= cut ? 1.0 : std::pow(r, -2.0 * delta);
    s += f[i] * f[i] * weight * w[i];
  }
  return s;
}
}  // namespace detail

/// L^2_delta norm: unweighted on r <= compact_cut, r^{-2 delta} beyond.
inline double weighted_norm(const ScalarField& f, const WeightedNormSpec& spec) {
  const FiberedChart& c = *f.chart;
  require(spec.compact_cut >= c.inner_radius() || spec.compact_cut <= 0.0, ErrorKind::kDomain,
          "compact_cut must not lie inside the inner radius");
  const auto w = flat_volume_weights(c);
  return std::sqrt(detail::weighted_sum(c, f.values, w, spec.delta, spec.compact_cut));
}

struct SplitNorm {
  double mean = 0.0;   // ||Pi_0 f|| in L^2_delta
  double perp = 0.0;   // ||Pi_perp f|| in L^2_epsilon
};

/// Norm pair defining L^2_{delta,epsilon}.
inline SplitNorm split_norm(const ScalarField& f, const WeightedNormSpec& spec) {
  auto [m, p] = project_fiber_mean(f);
  return {weighted_norm(m, spec), weighted_norm(p, {spec.epsilon, 0.0, spec.compact_cut})};
}

/// Diagnostic H^2_delta norm: f, r df and r^2 d^2 f measured in L^2_delta.
inline double h2_weighted_norm(const ScalarField& f, const WeightedNormSpec& spec) {
  const FiberedChart& c = *f.chart;
  const ChartDifferentiator d(f.chart);
  const auto w = flat_volume_weights(c);
  double total = detail::weighted_sum(c, f.values, w, spec.delta, spec.compact_cut);
  const auto grad = d.gradient(f.values);
  std::vector<double> scaled(c.size());
  for (int a = 0; a < c.n(); ++a) {
    for (std::size_t i = 0; i < c.size(); ++i) scaled[i] = grad[a][i] * c.radius(c.decompose(i).ir);
    total += detail::weighted_sum(c, scaled, w, spec.delta, spec.compact_cut);
  }
  const auto hess = d.hessian(f.values);
  for (int a = 0; a < c.n(); ++a)
    for (int b = a; b < c.n(); ++b) {
      const double mult = a == b ? 1.0 : 2.0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const double r = c.radius(c.decompose(i).ir);
        scaled[i] = hess[sym_index(a, b, c.n())][i] * r * r;
      }
      total += mult * detail::weighted_sum(c, scaled, w, spec.delta, spec.compact_cut);
    }
  return std::sqrt(total);
}

}  // namespace fml
