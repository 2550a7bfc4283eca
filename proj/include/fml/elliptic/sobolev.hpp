#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fml/geometry/laplace.hpp"

namespace fml {

struct SobolevEstimate {
  double constant = 0.0;
  int trial_count = 0;
  int worst_trial = -1;
  std::vector<double> running_max;  // nondecreasing by construction
};

struct SobolevTrials {
  int count = 24;
  double domain_radius = 8.0;       // trial centers lie in B_r
  std::vector<double> widths{1.5, 2.5};
  int max_fiber_mode = 2;
  unsigned seed = 7;
};

/// ||f||_{L^{2n/(n-2)}} / ||grad f||_{L^2} for a grid field; the gradient norm
/// is the discrete energy f^T K f of the Neumann operator.
inline double sobolev_ratio(const LaplaceOperator& op, const std::vector<double>& f, int n) {
  const double p = 2.0 * n / (n - 2.0);
  double lp = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) lp += op.weights[i] * std::pow(std::abs(f[i]), p);
  std::vector<double> kf;
  op.stiffness.multiply(f, kf);
  const double energy = dot(f, kf);
  if (!(energy > 0.0)) return 0.0;
  return std::pow(lp, 1.0 / p) / std::sqrt(energy);
}

/// Bump (1 - |x - c|^2 / w^2)^3 times (1 + a cos(2 pi j y^1 / L)).
struct SobolevTrial {
  std::array<double, 3> center{};
  double width = 1.0;
  int mode = 0;
  double amplitude = 0.0;

  double value(const Point& p, double L) const {
    double d2 = 0.0;
    for (int i = 0; i < 3; ++i) d2 += (p.x[i] - center[i]) * (p.x[i] - center[i]);
    const double q = 1.0 - d2 / (width * width);
    if (q <= 0.0) return 0.0;
    return q * q * q * (1.0 + amplitude * std::cos(2.0 * std::numbers::pi * mode * p.y[0] / L));
  }
};

inline SobolevTrial draw_sobolev_trial(std::mt19937& rng, const SobolevTrials& t) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = t.domain_radius * std::cbrt(unit(rng));
  const double ct = 2.0 * unit(rng) - 1.0, ph = 2.0 * std::numbers::pi * unit(rng);
  const double st = std::sqrt(1.0 - ct * ct);
  SobolevTrial tr;
  tr.center = {radius * st * std::cos(ph), radius * st * std::sin(ph), radius * ct};
  tr.width = t.widths[static_cast<std::size_t>(unit(rng) * t.widths.size()) % t.widths.size()];
  tr.mode = static_cast<int>(unit(rng) * (t.max_fiber_mode + 1)) % (t.max_fiber_mode + 1);
  tr.amplitude = tr.mode == 0 ? 0.0 : 0.5 * unit(rng);
  return tr;
}

/// Grid samples of a random trial.
inline std::vector<double> sobolev_trial(const FiberedChart& c, std::mt19937& rng, const SobolevTrials& t) {
  const SobolevTrial tr = draw_sobolev_trial(rng, t);
  const double L = c.fiber().lengths[0];
  std::vector<double> f(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) f[i] = tr.value(c.point(i), L);
  return f;
}

/// Sobolev ratio of one trial by midpoint quadrature on a box around its
/// support, with the metric evaluated pointwise. The resolution is the same
/// wherever the trial sits. Returns 0 when the box leaves the chart.
inline double sobolev_ratio(const MetricField& metric, const SobolevTrial& tr, int nx = 20, int ny = 12) {
  const FiberedChart& c = *metric.chart;
  const int n = c.n(), m = c.fiber_dim();
  const double L = c.fiber().lengths[0];
  double cmax = 0.0;
  for (double v : tr.center) cmax += v * v;
  cmax = std::sqrt(cmax);
  if (cmax - tr.width < c.radius(0) || cmax + tr.width > c.radius(c.nr() - 1)) return 0.0;
  const int nfib = m == 1 ? ny : std::max(4, ny / 2);
  std::size_t fcount = 1;
  for (int a = 0; a < m; ++a) fcount *= nfib;
  const double hx = 2.0 * tr.width / nx;
  double cell = hx * hx * hx;
  for (int a = 0; a < m; ++a) cell *= c.fiber().lengths[a] / nfib;
  const double p = 2.0 * n / (n - 2.0);
  const double k = 2.0 * std::numbers::pi * tr.mode / L;
  double lp = 0.0, energy = 0.0;
  for (int i0 = 0; i0 < nx; ++i0)
    for (int i1 = 0; i1 < nx; ++i1)
      for (int i2 = 0; i2 < nx; ++i2) {
        Point pt;
        pt.k = 3;
        pt.m = m;
        const int ii[3] = {i0, i1, i2};
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          pt.x[a] = tr.center[a] - tr.width + (ii[a] + 0.5) * hx;
          d2 += (pt.x[a] - tr.center[a]) * (pt.x[a] - tr.center[a]);
        }
        const double q = 1.0 - d2 / (tr.width * tr.width);
        if (q <= 0.0) continue;
        const double r = pt.radius();
        ChartPoint cp;
        cp.r = r;
        cp.theta = std::acos(std::clamp(pt.x[2] / r, -1.0, 1.0));
        cp.phi = std::atan2(pt.x[1], pt.x[0]);
        if (cp.phi < 0.0) cp.phi += 2.0 * std::numbers::pi;
        for (std::size_t fi = 0; fi < fcount; ++fi) {
          std::size_t rest = fi;
          for (int a = m - 1; a >= 0; --a) {
            const double y = (static_cast<double>(rest % nfib) + 0.5) * c.fiber().lengths[a] / nfib;
            cp.fiber[a] = y;
            pt.y[a] = y;
            rest /= nfib;
          }
          const SmallMatrix g = eval_metric(metric, cp);
          const double root = std::sqrt(g.determinant());
          const double mod = 1.0 + tr.amplitude * std::cos(k * pt.y[0]);
          const double f = q * q * q * mod;
          SmallVector grad = SmallVector::Zero(n);
          for (int a = 0; a < 3; ++a)
            grad(a) = 3.0 * q * q * (-2.0 * (pt.x[a] - tr.center[a]) / (tr.width * tr.width)) * mod;
          grad(3) = -q * q * q * tr.amplitude * k * std::sin(k * pt.y[0]);
          lp += root * std::pow(f, p);
          energy += root * grad.dot(g.inverse() * grad);
        }
      }
  if (!(energy > 0.0)) return 0.0;
  return std::pow(lp * cell, 1.0 / p) / std::sqrt(energy * cell);
}

/// Running maximum of the Sobolev ratio over randomized compactly supported
/// trials. Trials whose support leaves the chart are skipped.
inline SobolevEstimate estimate_sobolev_constant(const MetricField& metric, const SobolevTrials& trials) {
  std::mt19937 rng(trials.seed);
  SobolevEstimate est;
  for (int t = 0; t < trials.count; ++t) {
    const double ratio = sobolev_ratio(metric, draw_sobolev_trial(rng, trials));
    if (ratio > est.constant) {
      est.constant = ratio;
      est.worst_trial = t;
    }
    est.running_max.push_back(est.constant);
    ++est.trial_count;
  }
  return est;
}

/// epsilon0 surrogate 1 / (2 c^2).
inline double epsilon0_from_sobolev(double c) { return 1.0 / (2.0 * c * c); }

}  // namespace fml
