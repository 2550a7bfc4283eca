#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fml/compactify/box_check.hpp"
#include "fml/compactify/cutoffs.hpp"
#include "fml/elliptic/conformal_solve.hpp"
#include "fml/elliptic/sobolev.hpp"
#include "fml/geometry/conformal.hpp"
#include "fml/geometry/curvature.hpp"
#include "fml/mass/functionals.hpp"

namespace fml {

struct PipelineOptions {
  double sigma = 4.0;          // first truncation scale
  int max_doublings = 6;
  double a_ratio = 0.1;        // accept sigma once |A_sigma| < a_ratio |m|
  double epsilon0 = -1.0;      // smallness threshold; negative = 1/(2c^2) from the Sobolev estimate
  double sc_tol = 1e-6;        // Sc >= -sc_tol
  double sc_floor = 1e-9;      // |negative Sc| below this is discretization noise
  double ledger_tol = 0.02;
  bool normalize = true;       // divide out the constant (1 - eps/2)^{4/(n-2)} beyond s2
  double box_side = -1.0;      // periodic box side; negative = 2 s2
  SolverConfig solver;
};

struct PipelineCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool ok = true;
};

struct MassLedgerEntry {
  std::string step;
  double m_before = 0.0;
  double m0 = 0.0;          // conformal factor coefficient, w = 1 + m0/r^{k-2} + ...
  double predicted = 0.0;
  double measured = 0.0;
  double rel_error = 0.0;
  bool ok = true;
};

struct SigmaTrial {
  double sigma = 0.0;
  double A_sigma = 0.0;
  double f_minus_norm = 0.0;
  bool accepted = false;
};

struct Decomposition {
  double m = 0.0;
  double m1 = 0.0;
  PackedTensor g_bar;
  double residual = 0.0;  // extrapolated ADM flux of g_bar
};

struct Step1Result {
  double sigma = 0.0;
  MetricField g_sigma;
  ScalarField u;
  double A_sigma = 0.0;
  double A_fit = 0.0;
  double f_minus_norm = 0.0;
  double epsilon0 = 0.0;
  MetricField g_tilde;
  double sc_min = 0.0;        // interior minimum of Sc(g_tilde)
  double sc_outer_max = 0.0;  // max |Sc(g_tilde)| on interior shells beyond 4 sigma
};

struct Step2Result {
  double s1 = 0.0, s2 = 0.0;
  int is1 = 0, is2 = 0;
  double epsilon = 0.0;
  double m_tilde = 0.0;        // U = 1 + m_tilde / r^{k-2} + ...
  double decay_exponent = 0.0;
  double conformal_defect = 0.0;
  double harmonic_residual = 0.0;  // max |Delta U| r^k / |m_tilde| beyond s1
  ZetaProfile zeta;
  ScalarField U;
  ScalarField v;
  double constant = 1.0;       // (1 - eps/2)^{4/(n-2)} removed when normalizing
  double lap_v_max = 0.0;      // max Delta v over r >= s1
  double lap_v_min = 0.0;      // min Delta v over s1 < r < s2
  MetricField metric;
  bool product_beyond_s2 = false;
};

struct PipelineState {
  double sigma = 0.0;
  double m = 0.0;
  double m1 = 0.0;
  Decomposition decomposition;
  std::vector<SigmaTrial> sigma_history;
  Step1Result step1;
  Step2Result step2;
  double sc_min = 0.0;
  double sc_max = 0.0;
  std::vector<MassLedgerEntry> ledger;
  std::vector<PipelineCheck> checks;
  std::optional<BoxReport> box;

  bool ok() const {
    for (const auto& c : checks)
      if (!c.ok) return false;
    for (const auto& e : ledger)
      if (!e.ok) return false;
    return true;
  }
};

namespace detail {

inline double conformal_exponent(int n) { return 4.0 / (n - 2); }

inline double leading_factor(double r, double m1, int n, int k) {
  return std::pow(1.0 + m1 / std::pow(r, k - 2), conformal_exponent(n));
}

inline MetricField with_components(const MetricField& like, PackedTensor comps, double tau) {
  MetricField out{like.chart, SymmetricTensorField(like.chart, like.dim()), tau, std::nullopt};
  out.g.components = std::move(comps);
  return out;
}

/// Interior extremes of a scalar over shells [2, nr-3] with lo <= r <= hi.
inline std::pair<double, double> interior_range(const FiberedChart& c, const std::vector<double>& f,
                                                double lo = 0.0,
                                                double hi = std::numeric_limits<double>::infinity()) {
  double mn = std::numeric_limits<double>::infinity(), mx = -mn;
  for (int ir = 2; ir <= c.nr() - 3; ++ir) {
    const double r = c.radius(ir);
    if (r < lo || r > hi) continue;
    const std::size_t base = c.index(ir, 0, 0, 0);
    for (std::size_t j = base; j < base + c.shell_size(); ++j) {
      mn = std::min(mn, f[j]);
      mx = std::max(mx, f[j]);
    }
  }
  return {mn, mx};
}

}  // namespace detail

/// Coefficient m0 of the conformal factor w = (after_yy / before_yy)^{(n-2)/4}
/// relating two metrics, from the two outermost fit shells.
inline double conformal_factor_coefficient(const MetricField& before, const MetricField& after) {
  const FiberedChart& c = *before.chart;
  const int n = c.n(), k = c.k();
  const auto& a = after.g(k, k);
  const auto& b = before.g(k, k);
  std::vector<double> one_minus(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) one_minus[i] = 1.0 - std::pow(a[i] / b[i], (n - 2) / 4.0);
  const auto prof = ShellQuadrature(c).mean_profile(one_minus);
  const ShellRange win = default_fit_window(c.nr());
  return -two_shell_amplitude(c.radii(), prof, win.end - 2, win.end - 1, k);
}

inline MassLedgerEntry ledger_entry(std::string step, double m_before, double m0, double measured, int n,
                                    int k, double tol) {
  MassLedgerEntry e;
  e.step = std::move(step);
  e.m_before = m_before;
  e.m0 = m0;
  e.predicted = conformal_mass_shift(m_before, m0, n, k);
  e.measured = measured;
  const double scale = std::max({std::abs(e.predicted), std::abs(m_before), 1e-12});
  e.rel_error = std::abs(measured - e.predicted) / scale;
  e.ok = e.rel_error <= tol;
  return e;
}

/// g = (1 + m1/r^{k-2})^{4/(n-2)} g_hat + g_bar with m1 = (n-2) m / (4(n-1)(k-2)).
inline Decomposition decompose_metric(const MetricField& metric, double mass) {
  const FiberedChart& c = *metric.chart;
  const int n = c.n(), k = c.k();
  Decomposition d;
  d.m = mass;
  d.m1 = (n - 2) * mass / (4.0 * (n - 1) * (k - 2));
  d.g_bar = metric.g.components;
  for (int a = 0; a < n; ++a) {
    auto& comp = d.g_bar[sym_index(a, a, n)];
    for (std::size_t i = 0; i < c.size(); ++i)
      comp[i] -= detail::leading_factor(c.radius(static_cast<int>(i / c.shell_size())), d.m1, n, k);
  }
  d.residual = mass_report(d.g_bar, metric.chart, MassForm::kAdm, {metric.tau}).extrapolated;
  return d;
}

/// g^sigma = (1 + m1/r^{k-2})^{4/(n-2)} g_hat + phi(r/sigma) g_bar.
inline MetricField truncate_metric(const MetricField& metric, const Decomposition& d, double sigma) {
  const FiberedChart& c = *metric.chart;
  require(4.0 * sigma <= c.radius(c.nr() - 1), ErrorKind::kDomain, "4 sigma lies beyond the chart");
  const int n = c.n(), k = c.k();
  PackedTensor comps = d.g_bar;
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      auto& comp = comps[sym_index(a, b, n)];
      for (std::size_t i = 0; i < c.size(); ++i) {
        const double r = c.radius(static_cast<int>(i / c.shell_size()));
        const double cut = phi_cutoff(r / sigma);
        comp[i] = cut == 0.0 ? 0.0 : cut * comp[i];
        if (a == b) comp[i] += detail::leading_factor(r, d.m1, n, k);
      }
    }
  MetricField out = detail::with_components(metric, std::move(comps), metric.tau);
  if (metric.closed_form) {
    const auto inner = metric.closed_form->eval;
    const double m1 = d.m1;
    out.closed_form = ClosedForm{metric.closed_form->name + "_sigma", metric.closed_form->params,
                                 [inner, m1, sigma, n, k](const Point& p) {
                                   const double r = p.radius();
                                   const double lead = detail::leading_factor(r, m1, n, k);
                                   const SmallMatrix base = lead * SmallMatrix::Identity(n, n);
                                   const double cut = phi_cutoff(r / sigma);
                                   if (cut == 0.0) return base;
                                   return SmallMatrix(base + cut * (inner(p) - base));
                                 }};
  }
  return out;
}

/// Solves Delta u - c_n varphi Sc u = 0 on g^sigma and forms u^{4/(n-2)} g^sigma.
inline Step1Result step1_flatten(const MetricField& g_sigma, double sigma, const PipelineOptions& opt) {
  const FiberedChart& c = *g_sigma.chart;
  const int n = c.n();
  const double cn = (n - 2) / (4.0 * (n - 1));
  Step1Result res;
  res.sigma = sigma;
  res.g_sigma = g_sigma;
  const ScalarField sc = scalar_curvature(g_sigma);
  std::vector<double> f(c.size(), 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double r = c.radius(static_cast<int>(i / c.shell_size()));
    double s = sc[i];
    if (s < 0.0 && s > -opt.sc_floor) s = 0.0;
    f[i] = cn * varphi_cutoff(r, sigma) * s;
  }
  res.epsilon0 = opt.epsilon0;
  if (res.epsilon0 <= 0.0) {
    SobolevTrials trials;
    trials.count = 12;
    res.epsilon0 = epsilon0_from_sobolev(estimate_sobolev_constant(g_sigma, trials).constant);
  }
  ConformalOptions copt;
  copt.solver = opt.solver;
  copt.support_radius = 4.0 * sigma;
  copt.epsilon0 = res.epsilon0;
  const ConformalSolution sol = solve_conformal(g_sigma, f, copt);
  res.u = sol.u;
  res.A_sigma = sol.A_flux;
  res.A_fit = sol.A_fit;
  res.f_minus_norm = sol.f_minus_norm;
  res.g_tilde = conformal_rescale(g_sigma, sol.u).metric;
  const ScalarField sct = scalar_curvature(res.g_tilde);
  res.sc_min = detail::interior_range(c, sct.values).first;
  const auto outer = detail::interior_range(c, sct.values, 4.0 * sigma);
  res.sc_outer_max = std::max(std::abs(outer.first), std::abs(outer.second));
  return res;
}

/// Lohkamp cutoff: v = zeta(U) beyond s1, with U the conformal factor of a
/// metric that is U^{4/(n-2)} g_hat outside r_conf.
inline Step2Result step2_lohkamp(const MetricField& metric, double r_conf, const PipelineOptions& opt) {
  const FiberedChart& c = *metric.chart;
  const int n = c.n(), k = c.k();
  const double p = detail::conformal_exponent(n);
  Step2Result res;
  res.U = ScalarField(metric.chart);
  for (std::size_t i = 0; i < c.size(); ++i) res.U[i] = std::pow(metric.g(k, k)[i], 1.0 / p);

  int ic = 0;
  while (ic < c.nr() && c.radius(ic) < r_conf) ++ic;
  require(ic < c.nr() - 4, ErrorKind::kDomain, "no conformally flat region inside the chart");
  for (std::size_t i = c.index(ic, 0, 0, 0); i < c.size(); ++i) {
    const double up = metric.g(k, k)[i];
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b)
        res.conformal_defect = std::max(res.conformal_defect, std::abs(metric.g(a, b)[i] - (a == b ? up : 0.0)));
  }

  const ShellQuadrature quad(c);
  std::vector<double> deficit(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) deficit[i] = 1.0 - res.U[i];
  const auto prof = quad.mean_profile(deficit);
  const ShellRange win = default_fit_window(c.nr());
  res.m_tilde = -two_shell_amplitude(c.radii(), prof, win.end - 2, win.end - 1, k);
  bool positive = true;
  for (int i = win.begin; i < win.end; ++i) positive = positive && prof[i] > 0.0;
  if (!positive || !(res.m_tilde < 0.0))
    fail(ErrorKind::kDomain, "mass is not negative: no shell with sup u < 1");
  res.decay_exponent = fit_decay(c.radii(), prof, win).exponent;

  auto shell_max = [&](int ir) {
    const std::size_t base = c.index(ir, 0, 0, 0);
    return *std::max_element(res.U.values.begin() + base, res.U.values.begin() + base + c.shell_size());
  };
  auto shell_min = [&](int ir) {
    const std::size_t base = c.index(ir, 0, 0, 0);
    return *std::min_element(res.U.values.begin() + base, res.U.values.begin() + base + c.shell_size());
  };
  res.is1 = std::max(ic, 2);
  while (res.is1 < c.nr() - 3 && !(shell_max(res.is1) < 1.0)) ++res.is1;
  if (res.is1 >= c.nr() - 3) fail(ErrorKind::kDomain, "mass is not negative: no shell with sup u < 1");
  res.s1 = c.radius(res.is1);
  res.epsilon = 1.0 - shell_max(res.is1);
  res.zeta = ZetaProfile(res.epsilon);

  const double level = 1.0 - 0.25 * res.epsilon;
  res.is2 = c.nr();
  for (int ir = c.nr() - 1; ir > res.is1 && shell_min(ir) > level; --ir) res.is2 = ir;
  if (res.is2 >= c.nr() - 2)
    fail(ErrorKind::kDomain, "chart too small: u does not exceed 1 - eps/4 before the outer boundary");
  res.s2 = c.radius(res.is2);

  res.v = res.U;
  const std::size_t start = c.index(res.is1, 0, 0, 0);
  for (std::size_t i = start; i < c.size(); ++i) res.v[i] = res.zeta(res.U[i]);

  const MetricField flat = flat_metric(metric.chart);
  const ScalarField lap_u = laplace_beltrami(flat, res.U);
  const ScalarField lap_v = laplace_beltrami(flat, res.v);
  res.lap_v_max = -std::numeric_limits<double>::infinity();
  res.lap_v_min = std::numeric_limits<double>::infinity();
  for (int ir = res.is1; ir <= c.nr() - 2; ++ir) {
    const double r = c.radius(ir);
    const std::size_t base = c.index(ir, 0, 0, 0);
    for (std::size_t j = base; j < base + c.shell_size(); ++j) {
      res.lap_v_max = std::max(res.lap_v_max, lap_v[j]);
      if (ir > res.is1 && ir < res.is2) res.lap_v_min = std::min(res.lap_v_min, lap_v[j]);
      res.harmonic_residual =
          std::max(res.harmonic_residual, std::abs(lap_u[j]) * std::pow(r, k) / std::abs(res.m_tilde));
    }
  }

  res.constant = opt.normalize ? std::pow(res.zeta.plateau(), p) : 1.0;
  PackedTensor comps = metric.g.components;
  for (std::size_t i = start; i < c.size(); ++i) {
    const double diag = std::pow(res.v[i], p) / res.constant;
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) comps[sym_index(a, b, n)][i] = a == b ? diag : 0.0;
  }
  if (opt.normalize)
    for (auto& comp : comps)
      for (std::size_t i = 0; i < start; ++i) comp[i] /= res.constant;
  res.metric = detail::with_components(metric, std::move(comps), metric.tau);

  const double far_diag = opt.normalize ? 1.0 : std::pow(res.zeta.plateau(), p);
  res.product_beyond_s2 = true;
  for (std::size_t i = c.index(res.is2, 0, 0, 0); i < c.size() && res.product_beyond_s2; ++i)
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b)
        if (res.metric.g(a, b)[i] != (a == b ? far_diag : 0.0))
          res.product_beyond_s2 = false;
  return res;
}

/// A_sigma and the smallness norm of Step 1 at each listed sigma.
inline std::vector<SigmaTrial> sigma_sweep(const MetricField& metric, const std::vector<double>& sigmas,
                                           const PipelineOptions& opt = {}) {
  const double mass = adm_mass(metric).extrapolated;
  const Decomposition d = decompose_metric(metric, mass);
  std::vector<SigmaTrial> out;
  for (double sigma : sigmas) {
    const Step1Result r = step1_flatten(truncate_metric(metric, d, sigma), sigma, opt);
    out.push_back({sigma, r.A_sigma, r.f_minus_norm,
                   std::abs(r.A_sigma) < opt.a_ratio * std::abs(mass) && r.f_minus_norm < r.epsilon0});
  }
  return out;
}

/// Step 1 with sigma doubling, then Step 2, with the mass ledger and every
/// runtime inequality recorded in the returned state.
inline PipelineState run_pipeline(const MetricField& metric, const PipelineOptions& opt = {}) {
  const FiberedChart& c = *metric.chart;
  const int n = c.n(), k = c.k();
  PipelineState st;
  st.m = adm_mass(metric).extrapolated;
  st.decomposition = decompose_metric(metric, st.m);
  st.m1 = st.decomposition.m1;
  {
    const double scale = std::max(std::abs(st.m), 1e-12);
    st.checks.push_back({"decomposition_residual", std::abs(st.decomposition.residual) / scale, 0.01,
                         std::abs(st.decomposition.residual) <= 0.01 * scale});
  }

  bool accepted = false;
  for (int dbl = 0; dbl <= opt.max_doublings && !accepted; ++dbl) {
    const double sigma = opt.sigma * std::pow(2.0, dbl);
    if (4.0 * sigma > c.radius(c.nr() - 1)) break;
    const MetricField gs = truncate_metric(metric, st.decomposition, sigma);
    Step1Result r1 = step1_flatten(gs, sigma, opt);
    SigmaTrial t{sigma, r1.A_sigma, r1.f_minus_norm, false};
    t.accepted = std::abs(r1.A_sigma) < opt.a_ratio * std::abs(st.m) && r1.f_minus_norm < r1.epsilon0;
    st.sigma_history.push_back(t);
    if (t.accepted) {
      accepted = true;
      st.sigma = sigma;
      st.step1 = std::move(r1);
    }
  }
  if (!accepted) fail(ErrorKind::kNumerical, "sigma doubling exhausted before |A_sigma| and smallness passed");

  const Step1Result& s1 = st.step1;
  st.checks.push_back({"step1_sc_min", s1.sc_min, -opt.sc_tol, s1.sc_min >= -opt.sc_tol});
  st.checks.push_back({"step1_sc_beyond_4sigma", s1.sc_outer_max, opt.sc_tol, s1.sc_outer_max <= opt.sc_tol});
  const double m_sigma = adm_mass(s1.g_sigma).extrapolated;
  const double m_tilde = adm_mass(s1.g_tilde).extrapolated;
  st.ledger.push_back(ledger_entry("step1", m_sigma, -s1.A_sigma, m_tilde, n, k, opt.ledger_tol));

  st.step2 = step2_lohkamp(s1.g_tilde, 4.0 * st.sigma, opt);
  const Step2Result& s2 = st.step2;
  st.checks.push_back({"step2_conformal_defect", s2.conformal_defect, 1e-12, s2.conformal_defect <= 1e-12});
  st.checks.push_back({"step2_laplacian_v_nonpositive", s2.lap_v_max, opt.sc_tol, s2.lap_v_max <= opt.sc_tol});
  st.checks.push_back({"step2_laplacian_v_strict", s2.lap_v_min, 0.0, s2.lap_v_min < 0.0});
  st.checks.push_back({"step2_product_beyond_s2", s2.product_beyond_s2 ? 0.0 : 1.0, 0.0, s2.product_beyond_s2});

  const ScalarField sc = scalar_curvature(s2.metric);
  std::tie(st.sc_min, st.sc_max) = detail::interior_range(c, sc.values);
  st.checks.push_back({"final_sc_min", st.sc_min, -opt.sc_tol, st.sc_min >= -opt.sc_tol});
  st.checks.push_back({"final_sc_positive_somewhere", st.sc_max, opt.sc_tol, st.sc_max > opt.sc_tol});

  // the product region beyond s2 is where the mass at infinity is read off
  MassOptions outer{s2.metric.tau};
  outer.first_shell = std::max(default_fit_window(c.nr()).begin, s2.is2 + 2);
  double m_final = 0.0;
  if (c.nr() - 3 - outer.first_shell >= 2 * richardson_pairing(c.ds()) + 1) {
    m_final = mass_report(s2.metric.g.components, s2.metric.chart, MassForm::kAdm, outer).extrapolated;
  } else {
    const auto shells = adm_shell_values(s2.metric.g.components, s2.metric.chart);
    for (int ir = outer.first_shell; ir <= c.nr() - 3; ++ir) m_final += shells[ir];
    m_final /= std::max(1, c.nr() - 2 - outer.first_shell);
  }
  const double m0 = conformal_factor_coefficient(s1.g_tilde, s2.metric);
  st.ledger.push_back(ledger_entry("step2", m_tilde, m0, m_final, n, k, opt.ledger_tol));

  const double side = opt.box_side > 0.0 ? opt.box_side : 2.0 * s2.s2;
  if (std::sqrt(double(k)) * 0.5 * side <= c.radius(c.nr() - 1)) {
    st.box = periodic_box_check(s2.metric, side);
    st.checks.push_back({"periodic_box", st.box->ok ? 0.0 : 1.0, 0.0, st.box->ok});
  } else {
    st.checks.push_back({"periodic_box", 1.0, 0.0, false});
  }
  return st;
}

}  // namespace fml
