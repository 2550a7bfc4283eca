#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fml/error.hpp"

namespace fml {

/// Least-squares power law |profile| ~ C r^{-p} over a shell window.
struct DecayFit {
  double coefficient = 0.0;
  double exponent = 0.0;
  double residual = 0.0;  // RMS of the log-log fit
  double r_min = 0.0;
  double r_max = 0.0;
  int shells = 0;
};

struct ShellRange {
  int begin = 0;  // inclusive
  int end = 0;    // exclusive
};

/// Outermost 40% of n shells, excluding the final two.
inline ShellRange default_fit_window(int n) {
  const int end = n - 2;
  const int begin = std::max(0, static_cast<int>(std::floor(0.6 * n)) - 2);
  return {begin, end};
}

inline DecayFit fit_decay(const std::vector<double>& radii, const std::vector<double>& profile,
                          ShellRange range) {
  require(range.end - range.begin >= 5, ErrorKind::kDomain, "decay fit needs at least 5 shells");
  require(range.begin >= 0 && range.end <= static_cast<int>(radii.size()), ErrorKind::kDomain,
          "fit window outside the profile");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int m = range.end - range.begin;
  for (int i = range.begin; i < range.end; ++i) {
    require(profile[i] > 0.0, ErrorKind::kDomain,
            "decay fit needs a positive profile (take norms first)");
    const double x = std::log(radii[i]), y = std::log(profile[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;
  double rss = 0.0;
  for (int i = range.begin; i < range.end; ++i) {
    const double e = std::log(profile[i]) - (intercept + slope * std::log(radii[i]));
    rss += e * e;
  }
  DecayFit fit;
  fit.coefficient = std::exp(intercept);
  fit.exponent = -slope;
  fit.residual = std::sqrt(rss / m);
  fit.r_min = radii[range.begin];
  fit.r_max = radii[range.end - 1];
  fit.shells = m;
  return fit;
}

inline DecayFit fit_decay(const std::vector<double>& radii, const std::vector<double>& profile) {
  return fit_decay(radii, profile, default_fit_window(static_cast<int>(radii.size())));
}

/// CSV row: quantity,C,p,residual,r_min,r_max
inline std::string decay_csv_row(const std::string& quantity, const DecayFit& f) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%.6g,%.12g,%.12g", quantity.c_str(), f.coefficient,
                f.exponent, f.residual, f.r_min, f.r_max);
  return buf;
}

}  // namespace fml
