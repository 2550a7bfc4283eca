#pragma once

#include <cmath>
#include <numbers>
#include <vector>

namespace fml {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline QuadratureRule gauss_legendre(int n) {
  QuadratureRule rule{std::vector<double>(n), std::vector<double>(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    if (n == 1) dp = 1.0;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = w;
  }
  if (n == 1) rule = {{0.0}, {2.0}};
  return rule;
}

/// Integral of f over [a, b] with an m-point Gauss-Legendre rule.
template <class F>
double integrate_gl(F&& f, double a, double b, int m = 16) {
  static thread_local std::vector<QuadratureRule> cache(64);
  QuadratureRule& rule = cache[m];
  if (rule.nodes.empty()) rule = gauss_legendre(m);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double sum = 0.0;
  for (int i = 0; i < m; ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return sum * half;
}

/// Fejer first-rule weights for integral_0^pi f(theta) sin(theta) dtheta
/// sampled at the half-offset nodes theta_j = (j + 1/2) pi / n.
inline std::vector<double> fejer_latitude_weights(int n) {
  std::vector<double> w(n);
  for (int j = 0; j < n; ++j) {
    const double th = (j + 0.5) * std::numbers::pi / n;
    double s = 0.0;
    for (int l = 1; l <= n / 2; ++l) s += std::cos(2.0 * l * th) / (4.0 * l * l - 1.0);
    w[j] = 2.0 / n * (1.0 - 2.0 * s);
  }
  return w;
}

}  // namespace fml
