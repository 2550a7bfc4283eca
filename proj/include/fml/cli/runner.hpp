#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fml/cli/config.hpp"
#include "fml/compactify/pipeline.hpp"
#include "fml/elliptic/conformal_solve.hpp"
#include "fml/elliptic/green.hpp"
#include "fml/elliptic/sobolev.hpp"
#include "fml/geometry/conformal.hpp"
#include "fml/io/container.hpp"
#include "fml/io/report.hpp"
#include "fml/mass/functionals.hpp"
#include "fml/rigidity/bochner.hpp"
#include "fml/rigidity/coefficients.hpp"
#include "fml/rigidity/variation.hpp"

namespace fml {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode { kExitOk = 0, kExitNumerical = 1, kExitConfig = 2 };

inline int exit_code_for(ErrorKind k) { return k == ErrorKind::kNumerical ? kExitNumerical : kExitConfig; }

inline const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kIo: return "io";
  }
  return "?";
}

struct StageResult {
  std::string name;
  std::string status;  // ok | failed | not_applicable | resumed
  int exit_code = kExitOk;
  json report;
};

struct RunReport {
  fs::path out;
  std::vector<StageResult> stages;
  int exit_code = kExitOk;
};

struct RunOptions {
  bool resume = false;  // keep stages whose report matches the config digest
};

namespace detail {

inline json mass_json(const MassReport& r) {
  return {{"form", r.form},
          {"extrapolated", r.extrapolated},
          {"error_estimate", r.error_estimate},
          {"spread", r.spread},
          {"fd_estimate", r.fd_estimate},
          {"converged", r.converged},
          {"convention", r.convention},
          {"quarter_normalized", r.quarter_normalized()},
          {"omega_k", r.omega_k},
          {"vol_X", r.vol_X}};
}

inline json checks_json(const std::vector<PipelineCheck>& checks) {
  json out = json::array();
  for (const auto& c : checks) out.push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"ok", c.ok}});
  return out;
}

// ---- stages ----

inline json stage_mass(const MetricField& metric, const fs::path& dir) {
  const MassReport adm = adm_mass(metric), in = intrinsic_mass(metric), gb = gauss_bonnet_mass(metric);
  CsvTable t({"r", "adm", "intrinsic", "gauss_bonnet"});
  for (std::size_t i = 0; i < adm.per_radius.size(); ++i)
    t.add(std::vector<double>{adm.per_radius[i].first, adm.per_radius[i].second, in.per_radius[i].second,
                              gb.per_radius[i].second});
  write_csv(dir / "shells.csv", t);
  write_metric((dir / "metric.fmlb").string(), metric);
  const double combined = adm.error_estimate + in.error_estimate;
  return {{"adm", mass_json(adm)},
          {"intrinsic", mass_json(in)},
          {"gauss_bonnet", mass_json(gb)},
          {"formula_agreement", std::abs(adm.extrapolated - in.extrapolated) <= combined + 1e-10},
          {"ok", true}};
}

inline json stage_green(const MetricField& metric, const ExperimentConfig& cfg, const fs::path& dir) {
  const FiberedChart& c = *metric.chart;
  int ir = c.nr() / 4;
  if (cfg.green.r > 0.0) {
    ir = 0;
    for (int i = 0; i < c.nr(); ++i)
      if (std::abs(c.radius(i) - cfg.green.r) < std::abs(c.radius(ir) - cfg.green.r)) ir = i;
  }
  const int it = cfg.green.theta_index >= 0 ? cfg.green.theta_index : c.ntheta() / 2;
  require(it < c.ntheta() && cfg.green.phi_index >= 0 && cfg.green.phi_index < c.nphi(), ErrorKind::kConfig,
          "green source angle index out of range");
  SolverConfig solver = cfg.solver;
  const GreenField g = green_function(metric, c.index(ir, it, cfg.green.phi_index, 0), solver);
  const RoughDecayResult rough = rough_decay_check(g, 0.1);
  CsvTable t({"r", "mean_G", "mean_grad_G"});
  for (int i = 0; i < c.nr(); ++i) t.add(std::vector<double>{c.radius(i), g.profile[i], g.gradient_profile[i]});
  write_csv(dir / "profile.csv", t);
  write_fields((dir / "green.fmlb").string(), metric.chart, {"G"}, {g.G.values});
  const double expected = c.k() - 2.0;  // G ~ r^{2-k}
  const bool ok = !g.negativity_flag && std::abs(g.fit.exponent - expected) <= 0.05 && rough.holds;
  return {{"source", {{"node", g.source}, {"r", c.radius(ir)}, {"theta_index", it}, {"phi_index", cfg.green.phi_index}}},
          {"outer_condition", outer_name(solver.outer)},
          {"decay", to_json(g.fit)},
          {"gradient_decay", to_json(g.gradient_fit)},
          {"expected_exponent", expected},
          {"min_value", g.min_value},
          {"negativity_flag", g.negativity_flag},
          {"rough_decay", {{"eps", 0.1}, {"holds", rough.holds}, {"constant", rough.constant},
                           {"tail_exponent", rough.tail_exponent}}},
          {"iterations", g.iterations},
          {"residual_norm", g.residual_norm},
          {"ok", ok}};
}

inline json stage_conformal(const MetricField& metric, const ExperimentConfig& cfg, const fs::path& dir) {
  const FiberedChart& c = *metric.chart;
  const int n = c.n(), k = c.k();
  const ScalarField sc = scalar_curvature(metric);
  const double cn = (n - 2) / (4.0 * (n - 1));
  std::vector<double> f(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) f[i] = cn * sc.values[i];
  ConformalOptions opt;
  opt.solver = cfg.solver;
  opt.epsilon0 = cfg.conformal.epsilon0;
  json sobolev = nullptr;
  if (cfg.conformal.sobolev) {
    SobolevTrials trials;
    trials.count = cfg.conformal.sobolev_trials;
    trials.seed = cfg.seed;
    const SobolevEstimate est = estimate_sobolev_constant(metric, trials);
    opt.epsilon0 = epsilon0_from_sobolev(est.constant);
    sobolev = {{"constant", est.constant}, {"trials", est.trial_count}, {"seed", cfg.seed}};
  }
  const ConformalSolution sol = solve_conformal(metric, f, opt);
  const MetricField rescaled = conformal_rescale(metric, sol.u).metric;
  const double m_before = adm_mass(metric).extrapolated;
  const double m_after = adm_mass(rescaled).extrapolated;
  // u = 1 - A / r^{k-2} + ..., so the conformal factor coefficient is -A
  const double predicted = conformal_mass_shift(m_before, -sol.A, n, k);
  const double scale = std::max({std::abs(predicted), std::abs(m_after), 1e-12});
  const double rel = std::abs(m_after - predicted) / scale;
  const ScalarField sc_after = scalar_curvature(rescaled);
  double sc_max = 0.0;
  for (int ir = 2; ir <= c.nr() - 3; ++ir)
    for (std::size_t j = c.index(ir, 0, 0, 0); j < c.index(ir + 1, 0, 0, 0); ++j)
      sc_max = std::max(sc_max, std::abs(sc_after.values[j]));
  CsvTable t({"r", "mean_one_minus_u"});
  for (int i = 0; i < c.nr(); ++i) t.add(std::vector<double>{c.radius(i), sol.profile[i]});
  write_csv(dir / "profile.csv", t);
  write_fields((dir / "u.fmlb").string(), metric.chart, {"u", "f"}, {sol.u.values, f});
  write_metric((dir / "rescaled.fmlb").string(), rescaled);
  return {{"A", sol.A},
          {"A_flux", sol.A_flux},
          {"A_fit", sol.A_fit},
          {"decay", to_json(sol.decay)},
          {"decay_valid", sol.decay_valid},
          {"f_minus_norm", sol.f_minus_norm},
          {"epsilon0", opt.epsilon0},
          {"sobolev", sobolev},
          {"iterations", sol.iterations},
          {"residual_norm", sol.residual_norm},
          {"mass_before", m_before},
          {"mass_after", m_after},
          {"mass_predicted", predicted},
          {"mass_rel_error", rel},
          {"sc_after_max_abs", sc_max},
          {"ok", rel <= 0.02}};
}

inline json stage_compactify(const MetricField& metric, const ExperimentConfig& cfg, const fs::path& dir) {
  const double m = adm_mass(metric).extrapolated;
  if (!(m < 0.0))
    fail(ErrorKind::kDomain, "compactification needs negative mass, the input has m = " + format_double(m));
  const PipelineState st = run_pipeline(metric, cfg.compactify);
  write_metric((dir / "g_sigma.fmlb").string(), st.step1.g_sigma);
  write_metric((dir / "g_tilde.fmlb").string(), st.step1.g_tilde);
  write_metric((dir / "final.fmlb").string(), st.step2.metric);
  write_fields((dir / "conformal_factors.fmlb").string(), metric.chart, {"u_step1", "U", "v"},
               {st.step1.u.values, st.step2.U.values, st.step2.v.values});
  CsvTable ledger({"step", "m_before", "m0", "predicted", "measured", "rel_error", "ok"});
  for (const auto& e : st.ledger)
    ledger.add({e.step, format_double(e.m_before), format_double(e.m0), format_double(e.predicted),
                format_double(e.measured), format_double(e.rel_error), e.ok ? "1" : "0"});
  write_csv(dir / "ledger.csv", ledger);
  CsvTable sig({"sigma", "A_sigma", "f_minus_norm", "accepted"});
  for (const auto& s : st.sigma_history)
    sig.add({format_double(s.sigma), format_double(s.A_sigma), format_double(s.f_minus_norm), s.accepted ? "1" : "0"});
  for (const auto& s : sigma_sweep(metric, cfg.sigma_sweep, cfg.compactify))
    sig.add({format_double(s.sigma), format_double(s.A_sigma), format_double(s.f_minus_norm), "sweep"});
  write_csv(dir / "sigma.csv", sig);
  json box = nullptr;
  if (st.box) {
    box = {{"side", st.box->side}, {"tol", st.box->tol}, {"ok", st.box->ok}, {"pairs", json::array()}};
    for (const auto& p : st.box->pairs)
      box["pairs"].push_back({{"axis", p.axis}, {"deviation_minus", p.deviation_minus},
                              {"deviation_plus", p.deviation_plus}, {"mismatch", p.mismatch}, {"ok", p.ok}});
  }
  const Step2Result& s2 = st.step2;
  return {{"mass", st.m},
          {"m1", st.m1},
          {"sigma", st.sigma},
          {"step1", {{"A_sigma", st.step1.A_sigma}, {"A_fit", st.step1.A_fit}, {"f_minus_norm", st.step1.f_minus_norm},
                     {"epsilon0", st.step1.epsilon0}, {"sc_min", st.step1.sc_min},
                     {"sc_outer_max", st.step1.sc_outer_max}}},
          {"step2", {{"s1", s2.s1}, {"s2", s2.s2}, {"epsilon", s2.epsilon}, {"m_tilde", s2.m_tilde},
                     {"decay_exponent", s2.decay_exponent}, {"conformal_defect", s2.conformal_defect},
                     {"harmonic_residual", s2.harmonic_residual}, {"constant", s2.constant},
                     {"lap_v_max", s2.lap_v_max}, {"lap_v_min", s2.lap_v_min},
                     {"product_beyond_s2", s2.product_beyond_s2}}},
          {"sc_min", st.sc_min},
          {"sc_max", st.sc_max},
          {"checks", checks_json(st.checks)},
          {"periodic_box", box},
          {"ok", st.ok()}};
}

inline json fit_json(const CoefficientFit& f) {
  json c = json::array();
  for (int i = 0; i < f.c.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < f.c.cols(); ++j) row.push_back(f.c(i, j));
    c.push_back(row);
  }
  json d = json::array();
  for (int i = 0; i < f.c_diag.size(); ++i) d.push_back(f.c_diag(i));
  return {{"frame", frame_name(f.frame)}, {"c", c}, {"c_diag", d}, {"asymmetry", f.asymmetry},
          {"fit_residual", f.fit_residual}, {"v_residual", to_json(f.v_residual)}, {"flagged", f.flagged},
          {"mass_from_coefficients", mass_from_coefficients(f)}};
}

inline json stage_rigidity(const MetricField& metric, const ExperimentConfig& cfg, const fs::path& dir) {
  const FiberedChart& c = *metric.chart;
  HarmonicOptions ho;
  ho.chi_radius = cfg.rigidity.chi_radius;
  ho.tol = std::min(cfg.solver.tol, 1e-12);
  ho.max_iter = cfg.solver.max_iter;
  const HarmonicCoordinates hc = build_harmonic_coordinates(metric, ho);
  std::vector<std::string> names;
  std::vector<std::vector<double>> arrays;
  for (int i = 0; i < c.k(); ++i) {
    names.push_back("y" + std::to_string(i + 1));
    arrays.push_back(hc.y[i].values);
  }
  for (int i = 0; i < c.k(); ++i) {
    names.push_back("u" + std::to_string(i + 1));
    arrays.push_back(hc.u[i].values);
  }
  write_fields((dir / "harmonic.fmlb").string(), metric.chart, names, arrays);

  const CoefficientFit chart_fit = fit_inverse_metric_coefficients(metric, nullptr, CoefficientFrame::kChart);
  const CoefficientFit harm_fit = fit_inverse_metric_coefficients(metric, &hc, CoefficientFrame::kHarmonic);
  const double m_adm = adm_mass(metric).extrapolated;
  const double m_y = adm_mass(metric_in_harmonic_coordinates(metric, hc)).extrapolated;
  const MassEquationResidual meq = massequation_residual(metric, hc, harm_fit);
  const BochnerReport b = bochner_energy(metric, hc);
  const ParallelReport par = parallel_oneform_check(metric, hc);

  CsvTable flux({"r", "face_flux"});
  for (std::size_t i = 0; i < b.face_radii.size(); ++i) flux.add(std::vector<double>{b.face_radii[i], b.face_flux[i]});
  write_csv(dir / "bochner_flux.csv", flux);

  json decay = json::array();
  for (const auto& f : hc.decay_fits) decay.push_back(to_json(f));
  const double coef_mass = mass_from_coefficients(chart_fit);
  json rep = {
      {"harmonic", {{"chi_radius", hc.chi_radius}, {"residual", hc.harmonic_residual}, {"decay", decay},
                    {"decay_threshold", hc.decay_threshold}, {"decay_ok", hc.decay_ok}, {"iterations", hc.iterations}}},
      {"coefficients_chart", fit_json(chart_fit)},
      {"coefficients_harmonic", fit_json(harm_fit)},
      {"mass_adm", m_adm},
      {"mass_adm_harmonic_frame", m_y},
      {"mass_ratio_adm_over_coefficients", coef_mass != 0.0 ? json(m_adm / coef_mass) : json(nullptr)},
      {"massequation_residual", {{"decay", to_json(meq.decay)}, {"threshold", meq.threshold},
                                 {"leading", meq.leading}, {"leading_relative", meq.leading_relative}, {"ok", meq.ok}}},
      {"bochner", {{"shell_lo", b.shell_lo}, {"shell_hi", b.shell_hi}, {"energy", b.energy},
                   {"ricci_term", b.ricci_term}, {"boundary_flux", b.boundary_flux}, {"closure", b.closure},
                   {"disc_error", b.disc_error}, {"closes", std::abs(b.closure) <= 5 * b.disc_error + 1e-10},
                   {"flux_mass", b.flux_mass}, {"flux_mass_spread", b.flux_mass_spread},
                   {"flux_mass_over_adm", m_adm != 0.0 ? json(b.flux_mass / m_adm) : json(nullptr)},
                   {"max_hessian", b.max_hessian}}},
      {"parallel", {{"max_hessian", par.max_hessian}, {"max_gram_deviation", par.max_gram_deviation}}},
      {"first_variation", nullptr}};
  if (cfg.rigidity.first_variation) {
    const auto& e = cfg.rigidity.eta;
    const SymmetricTensorField h =
        ricci_direction(metric, [&](double r) { return bump_window(r, e[0], e[1], e[2], e[3]); });
    const FirstVariationProbe p = mass_first_variation(metric, h, cfg.rigidity.t_values, cfg.solver);
    CsvTable t({"t", "mass", "A"});
    for (std::size_t i = 0; i < p.t_values.size(); ++i)
      t.add(std::vector<double>{p.t_values[i], p.masses[i], p.A_values[i]});
    write_csv(dir / "first_variation.csv", t);
    rep["first_variation"] = {{"slope", p.slope}, {"slope_error", p.slope_error}, {"intercept", p.intercept},
                              {"ricci_pairing", p.ricci_pairing}, {"predicted_slope", p.predicted_slope},
                              {"linearized_slope", p.linearized_slope}, {"max_th", p.max_th}};
  }
  rep["ok"] = hc.harmonic_residual <= 1e-8 && rep["bochner"]["closes"].get<bool>();
  return rep;
}

inline bool stage_done(const fs::path& dir, const std::string& digest) {
  const fs::path p = dir / "report.json";
  if (!fs::exists(p)) return false;
  try {
    const json r = read_json(p);
    return r.value("status", "") == "ok" && r.value("config_digest", "") == digest;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace detail

/// Runs one task (or all five in order) into out. Every stage writes its
/// artifacts and then its report.json; a failure writes the error record and
/// stops the run.
inline RunReport run(const std::string& task, const ExperimentConfig& cfg, const fs::path& out,
                     const RunOptions& ropt = {}) {
  std::vector<std::string> stages;
  if (task == "all") {
    stages = task_names();
  } else {
    const auto& names = task_names();
    require(std::find(names.begin(), names.end(), task) != names.end(), ErrorKind::kConfig, "unknown task '" + task + "'");
    stages = {task};
  }
  RunReport rr;
  rr.out = out;
  fs::create_directories(out);
  const std::string digest = config_digest(cfg.source);
  json run_record = {{"task", task}, {"config", cfg.source}, {"config_digest", digest}, {"stages", json::array()}};

  std::optional<MetricField> metric;
  auto finish = [&]() {
    for (const auto& s : rr.stages)
      run_record["stages"].push_back({{"name", s.name}, {"status", s.status}, {"exit_code", s.exit_code}});
    run_record["exit_code"] = rr.exit_code;
    write_json(out / "run.json", run_record);
    return rr;
  };

  for (const std::string& name : stages) {
    const fs::path dir = out / name;
    StageResult sr{name, "ok", kExitOk, json::object()};
    if (ropt.resume && detail::stage_done(dir, digest)) {
      sr.status = "resumed";
      sr.report = read_json(dir / "report.json");
      rr.stages.push_back(sr);
      continue;
    }
    fs::create_directories(dir);
    fs::remove(dir / "report.json");
    try {
      if (!metric) metric = instantiate_metric(cfg);
      json body;
      if (name == "mass") body = detail::stage_mass(*metric, dir);
      else if (name == "green") body = detail::stage_green(*metric, cfg, dir);
      else if (name == "conformal") body = detail::stage_conformal(*metric, cfg, dir);
      else if (name == "compactify") body = detail::stage_compactify(*metric, cfg, dir);
      else body = detail::stage_rigidity(*metric, cfg, dir);
      const bool ok = body.value("ok", true);
      sr.status = ok ? "ok" : "failed";
      sr.exit_code = ok ? kExitOk : kExitNumerical;
      sr.report = {{"stage", name}, {"status", sr.status}, {"config_digest", digest}, {"result", body}};
    } catch (const Error& e) {
      const bool inapplicable = task == "all" && name == "compactify" && e.kind() == ErrorKind::kDomain;
      sr.status = inapplicable ? "not_applicable" : "failed";
      sr.exit_code = inapplicable ? kExitOk : exit_code_for(e.kind());
      sr.report = {{"stage", name},
                   {"status", sr.status},
                   {"config_digest", digest},
                   {"error", {{"kind", error_kind_name(e.kind())}, {"message", e.what()}}}};
    }
    write_json(dir / "report.json", sr.report);
    rr.stages.push_back(sr);
    if (sr.exit_code != kExitOk) {
      rr.exit_code = sr.exit_code;
      break;
    }
  }
  return finish();
}

}  // namespace fml
