#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fml/error.hpp"

namespace fml {

struct RichardsonResult {
  double value = 0.0;
  double spread = 0.0;              // |last - previous| extrapolant
  std::vector<double> extrapolants;  // second level, in shell order
  bool converged = true;
};

/// Two-level Richardson elimination of R^{-p} and R^{-(p+1)} from shell
/// values on geometric radii, pairing shells d apart. Uses shells [lo, hi].
inline RichardsonResult richardson_shells(const std::vector<double>& radii, const std::vector<double>& values,
                                          int lo, int hi, double p, int d) {
  require(hi - lo >= 2 * d + 1, ErrorKind::kDomain, "too few shells for two Richardson levels");
  std::vector<double> e1, e2;
  for (int i = lo; i + d <= hi; ++i) {
    const double q = std::pow(radii[i + d] / radii[i], p);
    e1.push_back((q * values[i + d] - values[i]) / (q - 1.0));
  }
  for (int i = 0; i + d < static_cast<int>(e1.size()); ++i) {
    const double q = std::pow(radii[lo + i + d] / radii[lo + i], p + 1.0);
    e2.push_back((q * e1[i + d] - e1[i]) / (q - 1.0));
  }
  RichardsonResult res;
  res.extrapolants = e2;
  res.value = e2.back();
  res.spread = std::abs(e2.back() - e2[e2.size() - 2]);
  // successive differences one radius doubling apart must not grow
  const std::size_t m = e2.size();
  if (m >= static_cast<std::size_t>(d) + 2) {
    const double last = std::abs(e2[m - 1] - e2[m - 2]);
    const double before = std::abs(e2[m - 1 - d] - e2[m - 2 - d]);
    double scale = 0.0;
    for (int i = lo; i <= hi; ++i) scale = std::max(scale, std::abs(values[i]));
    res.converged = last <= 1.5 * before + 1e-6 * scale + 1e-12;
  }
  return res;
}

/// Pairing distance giving roughly a factor 2 in radius.
inline int richardson_pairing(double ds) { return std::max(1, static_cast<int>(std::lround(std::log(2.0) / ds))); }

}  // namespace fml
