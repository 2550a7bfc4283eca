#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fml/geometry/curvature.hpp"
#include "fml/geometry/differentiation.hpp"
#include "fml/geometry/metric.hpp"
#include "fml/geometry/shells.hpp"
#include "fml/mass/richardson.hpp"

namespace fml {

struct MassReport {
  std::vector<std::pair<double, double>> per_radius;
  double extrapolated = 0.0;
  double error_estimate = 0.0;
  double spread = 0.0;         // Richardson spread of the last two extrapolants
  double fd_estimate = 0.0;    // (m_h - m_2h)/3 from the coarsened stencil
  bool converged = true;
  std::string convention = "definition-2.2";
  std::string form;
  double omega_k = 0.0;
  double vol_X = 0.0;
  double quarter_normalized() const { return 0.25 * extrapolated; }
};

enum class MassForm { kAdm, kIntrinsic, kGaussBonnet };

inline const char* mass_form_name(MassForm f) {
  switch (f) {
    case MassForm::kAdm: return "adm";
    case MassForm::kIntrinsic: return "intrinsic";
    default: return "gauss_bonnet";
  }
}

namespace detail {

inline std::vector<double> packed_trace(const PackedTensor& g, int n, int from, int to) {
  std::vector<double> t(g[0].size(), 0.0);
  for (int a = from; a < to; ++a)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += g[sym_index(a, a, n)][i];
  return t;
}

/// Normal nu^j = x^j / r at every node (constant along the fiber).
inline std::vector<std::vector<double>> unit_normal(const FiberedChart& c) {
  std::vector<std::vector<double>> nu(c.k(), std::vector<double>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const NodeIndex idx = c.decompose(i);
    const auto nv = c.normal(idx.it, idx.ip);
    for (int j = 0; j < c.k(); ++j) nu[j][i] = nv[j];
  }
  return nu;
}

inline double shell_scale(const FiberedChart& c, int ir) {
  const double r = c.radius(ir);
  return std::pow(r, c.k() - 1) / (omega_k(c.k()) * c.fiber_volume());
}

}  // namespace detail

/// Shell values m(R_i) = R^{k-1}/(omega_k Vol X) int (d_a g_ja - d_j g_aa) nu^j
/// evaluated with the plain chain-rule partials.
inline std::vector<double> adm_shell_values(const PackedTensor& g, const ChartPtr& chart, int stride = 1) {
  const FiberedChart& c = *chart;
  const int n = c.n(), k = c.k();
  const ChartDifferentiator d(chart, stride);
  const auto nu = detail::unit_normal(c);
  std::vector<double> integrand(c.size(), 0.0), tmp;
  for (int j = 0; j < k; ++j)
    for (int a = 0; a < n; ++a) {
      d.partial(g[sym_index(j, a, n)], a, tmp);
      for (std::size_t i = 0; i < c.size(); ++i) integrand[i] += tmp[i] * nu[j][i];
    }
  const auto trace = detail::packed_trace(g, n, 0, n);
  for (int j = 0; j < k; ++j) {
    d.partial(trace, j, tmp);
    for (std::size_t i = 0; i < c.size(); ++i) integrand[i] -= tmp[i] * nu[j][i];
  }
  const ShellQuadrature quad(c);
  std::vector<double> out(c.nr());
  for (int ir = 0; ir < c.nr(); ++ir) out[ir] = detail::shell_scale(c, ir) * quad.unit_integral(integrand, ir);
  return out;
}

/// Same quantity through div_E(W) - (tr_E g - g(nu,nu))/r + d_alpha g_j alpha nu^j - d_r Tr g,
/// W_i = h_ij nu^j, with the conservative chart divergence for W. It is
/// applied to h = g - g_hat: the background terms cancel identically, and
/// differencing them would leave an O(h^2 R) remainder.
inline std::vector<double> intrinsic_shell_values(const PackedTensor& g, const ChartPtr& chart, int stride = 1) {
  const FiberedChart& c = *chart;
  const int n = c.n(), k = c.k();
  const ChartDifferentiator d(chart, stride);
  const auto nu = detail::unit_normal(c);
  std::vector<std::vector<double>> W(n, std::vector<double>(c.size(), 0.0));
  std::vector<double> integrand(c.size(), 0.0), tmp;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double trE = 0.0, gnn = 0.0;
    auto h = [&](int a, int b) { return g[sym_index(a, b, n)][i] - (a == b ? 1.0 : 0.0); };
    for (int a = 0; a < k; ++a) {
      trE += h(a, a);
      double w = 0.0;
      for (int b = 0; b < k; ++b) {
        w += h(a, b) * nu[b][i];
        gnn += nu[a][i] * h(a, b) * nu[b][i];
      }
      W[a][i] = w;
    }
    const double r = c.radius(static_cast<int>(i / c.shell_size()));
    integrand[i] = -(trE - gnn) / r;
  }
  const auto div = d.divergence(W);
  for (std::size_t i = 0; i < c.size(); ++i) integrand[i] += div[i];
  for (int j = 0; j < k; ++j)
    for (int a = k; a < n; ++a) {
      d.partial(g[sym_index(j, a, n)], a, tmp);
      for (std::size_t i = 0; i < c.size(); ++i) integrand[i] += tmp[i] * nu[j][i];
    }
  const auto trace = detail::packed_trace(g, n, 0, n);
  d.chart_partial(trace, 0, tmp);
  for (std::size_t i = 0; i < c.size(); ++i)
    integrand[i] -= tmp[i] / c.radius(static_cast<int>(i / c.shell_size()));
  const ShellQuadrature quad(c);
  std::vector<double> out(c.nr());
  for (int ir = 0; ir < c.nr(); ++ir) out[ir] = detail::shell_scale(c, ir) * quad.unit_integral(integrand, ir);
  return out;
}

/// Fiber-trace correction R^{k-1}/(2 omega_k Vol X) int d_r Tr_X g per shell.
inline std::vector<double> fiber_trace_shell_values(const PackedTensor& g, const ChartPtr& chart, int stride = 1) {
  const FiberedChart& c = *chart;
  const ChartDifferentiator d(chart, stride);
  const auto trx = detail::packed_trace(g, c.n(), c.k(), c.n());
  std::vector<double> dr;
  d.chart_partial(trx, 0, dr);
  for (std::size_t i = 0; i < c.size(); ++i) dr[i] /= c.radius(static_cast<int>(i / c.shell_size()));
  const ShellQuadrature quad(c);
  std::vector<double> out(c.nr());
  for (int ir = 0; ir < c.nr(); ++ir)
    out[ir] = 0.5 * detail::shell_scale(c, ir) * quad.unit_integral(dr, ir);
  return out;
}

inline std::vector<double> mass_shell_values(const PackedTensor& g, const ChartPtr& chart, MassForm form,
                                             int stride = 1) {
  switch (form) {
    case MassForm::kAdm: return adm_shell_values(g, chart, stride);
    case MassForm::kIntrinsic: return intrinsic_shell_values(g, chart, stride);
    default: {
      auto m = intrinsic_shell_values(g, chart, stride);
      const auto corr = fiber_trace_shell_values(g, chart, stride);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += corr[i];
      return m;
    }
  }
}

struct MassOptions {
  double tau = 1.0;
  int last_shell = -1;   // default nr - 3
  int first_shell = -1;  // default 2
};

/// Extrapolated mass with a Richardson spread and a stencil-coarsening error
/// estimate; works on any packed (0,2) tensor sampled on the chart.
inline MassReport mass_report(const PackedTensor& g, const ChartPtr& chart, MassForm form,
                              const MassOptions& opt = {}) {
  const FiberedChart& c = *chart;
  const int lo = opt.first_shell >= 0 ? opt.first_shell : 2;
  const int hi = opt.last_shell >= 0 ? opt.last_shell : c.nr() - 3;
  const auto fine = mass_shell_values(g, chart, form, 1);
  const auto coarse = mass_shell_values(g, chart, form, 2);
  const double p = std::max(0.5, 2.0 * opt.tau - c.k() + 2.0);
  const int d = richardson_pairing(c.ds());
  const RichardsonResult rf = richardson_shells(c.radii(), fine, lo, hi, p, d);
  const RichardsonResult rc = richardson_shells(c.radii(), coarse, lo, hi, p, d);
  MassReport rep;
  rep.form = mass_form_name(form);
  for (int ir = lo; ir <= hi; ++ir) rep.per_radius.emplace_back(c.radius(ir), fine[ir]);
  rep.extrapolated = rf.value;
  rep.spread = rf.spread;
  rep.fd_estimate = std::abs(rf.value - rc.value) / 3.0;
  rep.error_estimate = std::max(rep.spread, rep.fd_estimate);
  rep.converged = rf.converged;
  rep.omega_k = omega_k(c.k());
  rep.vol_X = c.fiber_volume();
  return rep;
}

inline MassReport adm_mass(const MetricField& m) {
  return mass_report(m.g.components, m.chart, MassForm::kAdm, {m.tau});
}
inline MassReport intrinsic_mass(const MetricField& m) {
  return mass_report(m.g.components, m.chart, MassForm::kIntrinsic, {m.tau});
}
inline MassReport gauss_bonnet_mass(const MetricField& m) {
  return mass_report(m.g.components, m.chart, MassForm::kGaussBonnet, {m.tau});
}

/// Single shell value at grid radius index ir.
inline double adm_mass_shell(const MetricField& m, int ir) {
  require(ir >= 1 && ir <= m.chart->nr() - 2, ErrorKind::kDomain, "shell radius outside the chart interior");
  return adm_shell_values(m.g.components, m.chart)[ir];
}

/// m(g) + 4(n-1)(k-2)/(n-2) m0.
inline double conformal_mass_shift(double m_base, double m0, int n, int k) {
  require(n > 2 && k >= 3, ErrorKind::kDomain, "conformal mass shift needs n > 2, k >= 3");
  return m_base + 4.0 * (n - 1) * (k - 2) / (n - 2.0) * m0;
}

}  // namespace fml
