#pragma once

#include <cmath>
#include <vector>

#include "fml/geometry/curvature.hpp"
#include "fml/geometry/laplace.hpp"
#include "fml/geometry/shells.hpp"
#include "fml/mass/richardson.hpp"
#include "fml/rigidity/harmonic.hpp"

namespace fml {

struct BochnerReport {
  int shell_lo = 0, shell_hi = 0;
  double energy = 0.0;         // sum_i int |nabla dy^i|^2 over shells [lo, hi]
  double ricci_term = 0.0;     // sum_i int Ric(dy^i, dy^i)
  double boundary_flux = 0.0;  // F(hi + 1/2) - F(lo - 1/2)
  double closure = 0.0;        // energy + ricci_term - boundary_flux
  double disc_error = 0.0;     // stride-2 vs stride-1 change of energy + ricci_term, / 3
  std::vector<double> face_radii;  // r at the face between shells j and j + 1
  std::vector<double> face_flux;   // F_j = sum_i int <nabla_nu dy^i, dy^i> over that face
  double flux_mass = 0.0;          // extrapolated F / (omega_k Vol X)
  double flux_mass_spread = 0.0;
  double max_hessian = 0.0;
};

struct ParallelReport {
  double max_hessian = 0.0;         // max node |nabla dy^i|_g
  double max_gram_deviation = 0.0;  // max |<dy^i, dy^j>_g - delta_ij|
};

namespace detail {

struct BochnerDensities {
  std::vector<double> hessian_sq;  // sum_i |nabla dy^i|^2
  std::vector<double> ricci;       // sum_i Ric(dy^i, dy^i)
  std::vector<double> half_norm;   // 1/2 sum_i |dy^i|^2
  std::vector<double> gram_dev;    // max_ij |<dy^i, dy^j> - delta_ij|
  std::vector<double> max_hess;    // max_i |nabla dy^i|
};

inline BochnerDensities bochner_densities(const MetricField& metric, const HarmonicCoordinates& hc, int stride,
                                          bool with_ricci) {
  const FiberedChart& c = *metric.chart;
  const int k = c.k(), n = c.n();
  const std::size_t N = c.size();
  const ChartDifferentiator d(metric.chart, stride);
  const ChristoffelField gam = christoffel(metric.g.components, n, d);
  PackedTensor ric;
  if (with_ricci) ric = ricci(metric.g.components, n, d);
  std::vector<std::vector<std::vector<double>>> grad, hess;
  for (int i = 0; i < k; ++i) {
    grad.push_back(coordinate_gradient(hc, i, stride));
    hess.push_back(coordinate_hessian(hc, i, stride));
  }
  BochnerDensities out;
  out.hessian_sq.assign(N, 0.0);
  out.ricci.assign(N, 0.0);
  out.half_norm.assign(N, 0.0);
  out.gram_dev.assign(N, 0.0);
  out.max_hess.assign(N, 0.0);
  parallel_for(N, [&](std::size_t j) {
    const SmallMatrix gi = metric.at(j).inverse();
    double G2[kMaxDim][kMaxDim][kMaxDim];  // Gamma^e_ab as G2[a][b][e]
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int e = 0; e < n; ++e) {
          double s = 0.0;
          for (int f = 0; f < n; ++f) s += gi(e, f) * gam(a, b, f)[j];
          G2[a][b][e] = s;
        }
    SmallMatrix R = SmallMatrix::Zero(n, n);
    if (with_ricci)
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) R(a, b) = R(b, a) = ric[sym_index(a, b, n)][j];
    std::vector<SmallVector> dy(k, SmallVector(n));
    for (int i = 0; i < k; ++i) {
      for (int a = 0; a < n; ++a) dy[i](a) = grad[i][a][j];
      SmallMatrix H(n, n);
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) {
          double v = hess[i][sym_index(a, b, n)][j];
          for (int e = 0; e < n; ++e) v -= G2[a][b][e] * dy[i](e);
          H(a, b) = H(b, a) = v;
        }
      const SmallMatrix M = gi * H;
      const double h2 = (M * M).trace();
      out.hessian_sq[j] += h2;
      out.max_hess[j] = std::max(out.max_hess[j], std::sqrt(std::max(h2, 0.0)));
      const SmallVector up = gi * dy[i];
      out.ricci[j] += up.dot(R * up);
      out.half_norm[j] += 0.5 * dy[i].dot(up);
    }
    for (int i = 0; i < k; ++i)
      for (int l = i; l < k; ++l)
        out.gram_dev[j] = std::max(out.gram_dev[j], std::abs(dy[i].dot(gi * dy[l]) - (i == l ? 1.0 : 0.0)));
  });
  return out;
}

}  // namespace detail

/// Bochner bookkeeping on the annulus of shells [lo, hi]: the flux of
/// (1/2)|dy|^2 through the annulus faces is read off the finite-volume
/// operator, so it telescopes exactly.
inline BochnerReport bochner_energy(const MetricField& metric, const HarmonicCoordinates& hc, int lo = -1,
                                    int hi = -1) {
  const FiberedChart& c = *metric.chart;
  BochnerReport rep;
  rep.shell_lo = lo >= 0 ? lo : 2;
  rep.shell_hi = hi >= 0 ? hi : c.nr() - 3;
  require(rep.shell_lo >= 1 && rep.shell_hi <= c.nr() - 2 && rep.shell_lo < rep.shell_hi, ErrorKind::kDomain,
          "Bochner annulus must sit inside the chart");
  const auto fine = detail::bochner_densities(metric, hc, 1, true);
  const auto coarse = detail::bochner_densities(metric, hc, 2, true);
  const LaplaceOperator op = assemble_laplace(metric, OuterCondition::kNeumann);

  std::vector<double> kf;
  op.stiffness.multiply(fine.half_norm, kf);
  double running = 0.0;
  for (int ir = 0; ir < c.nr() - 1; ++ir) {
    const std::size_t base = c.index(ir, 0, 0, 0);
    for (std::size_t j = base; j < base + c.shell_size(); ++j) running -= kf[j];
    rep.face_radii.push_back(std::exp(c.s(ir) + 0.5 * c.ds()));
    rep.face_flux.push_back(running);
  }

  double e1 = 0.0, r1 = 0.0, e2 = 0.0, r2 = 0.0;
  for (std::size_t j = c.index(rep.shell_lo, 0, 0, 0); j < c.index(rep.shell_hi + 1, 0, 0, 0); ++j) {
    e1 += op.weights[j] * fine.hessian_sq[j];
    r1 += op.weights[j] * fine.ricci[j];
    e2 += op.weights[j] * coarse.hessian_sq[j];
    r2 += op.weights[j] * coarse.ricci[j];
    rep.max_hessian = std::max(rep.max_hessian, fine.max_hess[j]);
  }
  rep.energy = e1;
  rep.ricci_term = r1;
  rep.boundary_flux = rep.face_flux[rep.shell_hi] - rep.face_flux[rep.shell_lo - 1];
  rep.closure = rep.energy + rep.ricci_term - rep.boundary_flux;
  rep.disc_error = (std::abs(e2 - e1) + std::abs(r2 - r1)) / 3.0;

  const double norm = omega_k(c.k()) * c.fiber_volume();
  std::vector<double> scaled(rep.face_flux.size());
  for (std::size_t j = 0; j < scaled.size(); ++j) scaled[j] = rep.face_flux[j] / norm;
  const ShellRange win = default_fit_window(c.nr());
  const RichardsonResult rr = richardson_shells(rep.face_radii, scaled, win.begin, static_cast<int>(scaled.size()) - 2,
                                                1.0, richardson_pairing(c.ds()));
  rep.flux_mass = rr.value;
  rep.flux_mass_spread = rr.spread;
  return rep;
}

/// Max node |nabla dy^i| and Gram deviation over shells with r >= r_from,
/// interior shells only.
inline ParallelReport parallel_oneform_check(const MetricField& metric, const HarmonicCoordinates& hc,
                                             double r_from = 0.0) {
  const FiberedChart& c = *metric.chart;
  const auto dens = detail::bochner_densities(metric, hc, 1, false);
  ParallelReport rep;
  for (int ir = 2; ir <= c.nr() - 3; ++ir) {
    if (c.radius(ir) < r_from) continue;
    const std::size_t base = c.index(ir, 0, 0, 0);
    for (std::size_t j = base; j < base + c.shell_size(); ++j) {
      rep.max_hessian = std::max(rep.max_hessian, dens.max_hess[j]);
      rep.max_gram_deviation = std::max(rep.max_gram_deviation, dens.gram_dev[j]);
    }
  }
  return rep;
}

}  // namespace fml
