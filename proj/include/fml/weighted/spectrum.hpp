#pragma once

#include <cmath>
#include <vector>

#include "fml/error.hpp"

namespace fml {

struct SpectrumEntry {
  int j = 0;
  double lambda = 0.0;      // j(k - 2 + j)
  double delta = 0.0;       // k/2 + j
  double nu_plus = 0.0;     // j
  double nu_minus = 0.0;    // 2 - k - j
};

struct SphereSpectrum {
  int k = 3;
  std::vector<SpectrumEntry> entries;

  /// True when delta avoids every delta_j and 2 - delta_j in the table.
  bool noncritical(double delta, double tol = 1e-12) const {
    for (const auto& e : entries)
      if (std::abs(delta - e.delta) < tol || std::abs(delta - (2.0 - e.delta)) < tol) return false;
    return true;
  }
};

/// Eigenvalues of the Laplacian on S^{k-1} and the associated exponents.
inline SphereSpectrum sphere_spectrum(int k, int j_max) {
  require(k >= 3, ErrorKind::kDomain, "k must be >= 3");
  SphereSpectrum s{k, {}};
  for (int j = 0; j <= j_max; ++j)
    s.entries.push_back({j, double(j) * (k - 2 + j), 0.5 * k + j, double(j), double(2 - k - j)});
  return s;
}

}  // namespace fml
