#pragma once

#include <cmath>

#include "fml/error.hpp"
#include "fml/geometry/golden.hpp"

namespace fml {

/// phi(t) = 1 for t <= 2, 0 for t >= 3.
inline double phi_cutoff(double t) { return 1.0 - smoothstep5(t - 2.0); }

/// varphi(r) = 0 on [0, sigma] and [4 sigma, inf), 1 on [2 sigma, 3 sigma].
inline double varphi_cutoff(double r, double sigma) {
  const double t = r / sigma;
  if (t <= 3.0) return smoothstep5(t - 1.0);
  return 1.0 - smoothstep5(t - 3.0);
}

/// zeta(t) = t below t0 = 1 - 3 eps/4, 1 - eps/2 above t1 = 1 - eps/4, and
/// t0 + w p((t - t0)/w) between, w = eps/2, p(x) = x - x^3 + x^4/2.
/// p' = (1 - x)^2 (1 + 2x) >= 0 and p'' = 6x(x - 1) <= 0, both matching
/// the outer pieces to second order.
class ZetaProfile {
 public:
  ZetaProfile() = default;
  explicit ZetaProfile(double eps) : eps_(eps) {
    require(eps > 0.0 && eps < 1.0, ErrorKind::kDomain, "zeta profile needs 0 < epsilon < 1");
  }

  double epsilon() const { return eps_; }
  double lower() const { return 1.0 - 0.75 * eps_; }
  double upper() const { return 1.0 - 0.25 * eps_; }
  double plateau() const { return 1.0 - 0.5 * eps_; }

  double operator()(double t) const {
    if (t <= lower()) return t;
    if (t >= upper()) return plateau();
    const double w = 0.5 * eps_, x = (t - lower()) / w;
    return lower() + w * (x - x * x * x + 0.5 * x * x * x * x);
  }
  double derivative(double t) const {
    if (t <= lower()) return 1.0;
    if (t >= upper()) return 0.0;
    const double x = (t - lower()) / (0.5 * eps_);
    return (1.0 - x) * (1.0 - x) * (1.0 + 2.0 * x);
  }
  double second_derivative(double t) const {
    if (t <= lower() || t >= upper()) return 0.0;
    const double w = 0.5 * eps_, x = (t - lower()) / w;
    return 6.0 * x * (x - 1.0) / w;
  }

 private:
  double eps_ = 0.1;
};

}  // namespace fml
