#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"

#include "fml/error.hpp"
#include "fml/geometry/metric.hpp"
#include "fml/quadrature.hpp"

namespace fml {

/// Quintic smoothstep 6t^5 - 15t^4 + 10t^3 clamped to [0, 1]; C2 at both ends.
inline double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

/// A registry entry: metric evaluator plus, for conformally flat entries,
/// the factor U with g = U^{4/(n-2)} g_hat.
struct GoldenMetric {
  ClosedForm form;
  double tau = 1.0;
  std::function<double(const Point&)> conformal_factor;
};

inline std::vector<std::string> registry_list() {
  return {"flat_product",       "schwarzschild_product", "fiber_trace_perturbation",
          "compact_bump",       "ricci_probe",           "schwarzschild_bump",
          "plummer_product"};
}

namespace detail {

inline double param(const nlohmann::json& p, const char* key, double fallback) {
  if (!p.contains(key)) return fallback;
  require(p.at(key).is_number(), ErrorKind::kConfig, std::string("parameter ") + key + " must be numeric");
  return p.at(key).get<double>();
}

inline GoldenMetric conformal_entry(std::string name, nlohmann::json params, int n, double tau,
                                    std::function<double(const Point&)> u) {
  const double expo = 4.0 / (n - 2);
  GoldenMetric gm;
  gm.tau = tau;
  gm.conformal_factor = u;
  gm.form = ClosedForm{std::move(name), std::move(params), [u, expo, n](const Point& p) {
                         return SmallMatrix(std::pow(u(p), expo) * SmallMatrix::Identity(n, n));
                       }};
  return gm;
}

/// Enclosed-charge profile M s5((r-a)/(b-a)) turned into the superharmonic
/// potential w(r) = int_r^inf M(s)/s^2 ds.
inline double shell_potential(double r, double mass, double a, double b) {
  if (r >= b) return mass / r;
  const auto charge = [=](double s) { return mass * smoothstep5((s - a) / (b - a)) / (s * s); };
  const double lo = std::max(r, a);
  return mass / b + integrate_gl(charge, lo, b, 24);
}

}  // namespace detail

/// Instantiates a registry metric for total dimension n.
inline GoldenMetric make_golden(const std::string& name, const nlohmann::json& params, int n) {
  using detail::param;
  const nlohmann::json p = params.is_null() ? nlohmann::json::object() : params;
  if (name == "flat_product") {
    GoldenMetric gm;
    gm.tau = 1.0;
    gm.conformal_factor = [](const Point&) { return 1.0; };
    gm.form = ClosedForm{name, p, [n](const Point&) { return SmallMatrix(SmallMatrix::Identity(n, n)); }};
    return gm;
  }
  if (name == "schwarzschild_product") {
    const double m0 = param(p, "m0", 0.05);
    return detail::conformal_entry(name, p, n, 1.0,
                                   [m0](const Point& x) { return 1.0 + m0 / x.radius(); });
  }
  if (name == "fiber_trace_perturbation") {
    const double a = param(p, "a", 0.05);
    GoldenMetric gm;
    gm.tau = 1.0;
    gm.form = ClosedForm{name, p, [n, a](const Point& x) {
                           SmallMatrix g = SmallMatrix::Identity(n, n);
                           g(3, 3) += a / x.radius();
                           return g;
                         }};
    return gm;
  }
  if (name == "compact_bump") {
    const double amp = param(p, "amplitude", 0.05);
    const double radius = param(p, "radius", 4.0);
    GoldenMetric gm;
    gm.tau = 2.0;
    gm.form = ClosedForm{name, p, [n, amp, radius](const Point& x) {
                           const double t = x.radius() / radius;
                           const double b = t < 1.0 ? std::pow(1.0 - t * t, 3) : 0.0;
                           SmallMatrix g = (1.0 + amp * b) * SmallMatrix::Identity(n, n);
                           const double off = 0.5 * amp * b * std::sin(x.y[0]) * x.x[0] / radius;
                           g(0, 3) += off;
                           g(3, 0) += off;
                           return g;
                         }};
    return gm;
  }
  if (name == "ricci_probe") {
    const double m0 = param(p, "m0", 0.05);
    const double d = param(p, "d", 0.05);
    return detail::conformal_entry(name, p, n, 1.0, [m0, d](const Point& x) {
      const double r = x.radius();
      return 1.0 + m0 / r + d * x.x[2] / (r * r * r);
    });
  }
  if (name == "schwarzschild_bump") {
    const double m0 = param(p, "m0", -0.03);
    const double mass = param(p, "M", 0.01);
    const double a = param(p, "a", 3.0);
    const double b = param(p, "b", 6.0);
    require(b > a && a > 0.0, ErrorKind::kConfig, "schwarzschild_bump needs 0 < a < b");
    return detail::conformal_entry(name, p, n, 1.0, [=](const Point& x) {
      const double r = x.radius();
      return 1.0 + m0 / r + detail::shell_potential(r, mass, a, b);
    });
  }
  if (name == "plummer_product") {
    const double m0 = param(p, "m0", 0.0);
    const double mass = param(p, "M", 0.02);
    const double a = param(p, "a", 2.0);
    return detail::conformal_entry(name, p, n, 1.0, [=](const Point& x) {
      const double r = x.radius();
      return 1.0 + m0 / r + mass / std::sqrt(r * r + a * a);
    });
  }
  fail(ErrorKind::kConfig, "unknown registry metric '" + name + "'");
}

inline MetricField sample_golden(const ChartPtr& chart, const std::string& name,
                                 const nlohmann::json& params = {}) {
  const GoldenMetric gm = make_golden(name, params, chart->n());
  return sample_metric(chart, gm.form, gm.tau);
}

}  // namespace fml
