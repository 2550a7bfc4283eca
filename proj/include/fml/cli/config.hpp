#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fml/compactify/pipeline.hpp"
#include "fml/elliptic/operator.hpp"
#include "fml/geometry/chart.hpp"
#include "fml/geometry/golden.hpp"
#include "fml/io/container.hpp"
#include "fml/io/report.hpp"

namespace fml {

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"mass", "green", "conformal", "compactify", "rigidity"};
  return names;
}

struct ChartConfig {
  int k = 3;
  int n = 4;
  FiberSpec fiber = FiberSpec::circle(2 * std::numbers::pi, 4);
  RadialSpec radial;
  AngularSpec angular;

  std::size_t node_count() const {
    return static_cast<std::size_t>(radial.count) * angular.n_theta * angular.n_phi * fiber.point_count();
  }
};

struct MetricConfig {
  std::string name;                 // registry entry
  nlohmann::json params = nlohmann::json::object();
  std::string container;            // FMLB1 path; replaces name when set
};

struct GreenConfig {
  double r = -1.0;                  // source radius; negative = the shell at a quarter of the grid
  int theta_index = -1;             // negative = n_theta / 2
  int phi_index = 0;
};

struct ConformalConfig {
  double epsilon0 = -1.0;           // negative skips the smallness check
  bool sobolev = false;             // estimate epsilon0 = 1/(2c^2) instead
  int sobolev_trials = 24;
};

struct RigidityConfig {
  double chi_radius = -1.0;
  bool first_variation = false;
  std::vector<double> eta{1.5, 2.5, 5.0, 8.0};  // window of h = eta Ric
  std::vector<double> t_values{-0.02, -0.01, 0.0, 0.01, 0.02};
};

struct ExperimentConfig {
  unsigned seed = 7;
  std::size_t node_cap = 2000000;
  ChartConfig chart;
  MetricConfig metric;
  SolverConfig solver;
  GreenConfig green;
  ConformalConfig conformal;
  PipelineOptions compactify;
  std::vector<double> sigma_sweep;  // extra Step 1 trials reported by compactify
  RigidityConfig rigidity;
  std::string output = "fml_out";
  nlohmann::json source = nlohmann::json::object();  // as read, for the run record
};

namespace detail {

class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j_.is_object(), ErrorKind::kConfig, where_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) const {
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::kConfig, where_ + "." + key + " has the wrong type");
    }
  }
  bool has(const char* key) const { return j_.contains(key); }
  ConfigReader child(const char* key) const { return ConfigReader(j_.at(key), where_ + "." + key); }
  const nlohmann::json& raw(const char* key) const { return j_.at(key); }

  void only(std::initializer_list<const char*> keys) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      require(known, ErrorKind::kConfig, "unknown key " + where_ + "." + it.key());
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
};

inline OuterCondition parse_outer(const std::string& s) {
  if (s == "robin") return OuterCondition::kRobin;
  if (s == "dirichlet") return OuterCondition::kDirichlet;
  fail(ErrorKind::kConfig, "solver.outer_condition must be robin or dirichlet, got '" + s + "'");
}

}  // namespace detail

inline const char* outer_name(OuterCondition o) {
  switch (o) {
    case OuterCondition::kRobin: return "robin";
    case OuterCondition::kDirichlet: return "dirichlet";
    case OuterCondition::kNeumann: return "neumann";
  }
  return "?";
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.source = j;
  const detail::ConfigReader root(j, "config");
  root.only({"seed", "node_cap", "chart", "metric", "solver", "green", "conformal", "compactify", "rigidity",
             "output"});
  root.get("seed", cfg.seed);
  root.get("node_cap", cfg.node_cap);
  root.get("output", cfg.output);

  if (root.has("chart")) {
    const auto c = root.child("chart");
    c.only({"k", "n", "fiber", "radial", "angular"});
    c.get("k", cfg.chart.k);
    c.get("n", cfg.chart.n);
    if (c.has("fiber")) {
      const auto f = c.child("fiber");
      f.only({"lengths", "counts"});
      f.get("lengths", cfg.chart.fiber.lengths);
      f.get("counts", cfg.chart.fiber.counts);
    }
    if (c.has("radial")) {
      const auto r = c.child("radial");
      r.only({"r_min", "r_max", "count"});
      r.get("r_min", cfg.chart.radial.r_min);
      r.get("r_max", cfg.chart.radial.r_max);
      r.get("count", cfg.chart.radial.count);
    }
    if (c.has("angular")) {
      const auto a = c.child("angular");
      a.only({"n_theta", "n_phi"});
      a.get("n_theta", cfg.chart.angular.n_theta);
      a.get("n_phi", cfg.chart.angular.n_phi);
    }
  }

  require(root.has("metric"), ErrorKind::kConfig, "config.metric is required");
  {
    const auto m = root.child("metric");
    m.only({"name", "params", "container"});
    m.get("name", cfg.metric.name);
    m.get("container", cfg.metric.container);
    if (m.has("params")) {
      cfg.metric.params = m.raw("params");
      require(cfg.metric.params.is_object(), ErrorKind::kConfig, "config.metric.params must be an object");
    }
    require(cfg.metric.name.empty() != cfg.metric.container.empty(), ErrorKind::kConfig,
            "config.metric needs exactly one of name or container");
    if (!cfg.metric.name.empty()) {
      const auto names = registry_list();
      require(std::find(names.begin(), names.end(), cfg.metric.name) != names.end(), ErrorKind::kConfig,
              "unknown registry metric '" + cfg.metric.name + "'");
    }
  }

  if (root.has("solver")) {
    const auto s = root.child("solver");
    s.only({"outer_condition", "tol", "max_iter", "fit_window"});
    std::string outer = "robin";
    s.get("outer_condition", outer);
    cfg.solver.outer = detail::parse_outer(outer);
    s.get("tol", cfg.solver.tol);
    s.get("max_iter", cfg.solver.max_iter);
    std::vector<int> win;
    s.get("fit_window", win);
    if (!win.empty()) {
      require(win.size() == 2 && win[0] >= 0 && win[1] > win[0] + 4, ErrorKind::kConfig,
              "solver.fit_window must be [begin, end) with at least 5 shells");
      cfg.solver.fit_begin = win[0];
      cfg.solver.fit_end = win[1];
    }
    require(cfg.solver.tol > 0.0 && cfg.solver.max_iter > 0, ErrorKind::kConfig, "solver tol and max_iter must be positive");
  }

  if (root.has("green")) {
    const auto g = root.child("green");
    g.only({"r", "theta_index", "phi_index"});
    g.get("r", cfg.green.r);
    g.get("theta_index", cfg.green.theta_index);
    g.get("phi_index", cfg.green.phi_index);
  }
  if (root.has("conformal")) {
    const auto c = root.child("conformal");
    c.only({"epsilon0", "sobolev", "sobolev_trials"});
    c.get("epsilon0", cfg.conformal.epsilon0);
    c.get("sobolev", cfg.conformal.sobolev);
    c.get("sobolev_trials", cfg.conformal.sobolev_trials);
  }
  if (root.has("compactify")) {
    const auto c = root.child("compactify");
    c.only({"sigma", "max_doublings", "a_ratio", "epsilon0", "sc_tol", "sc_floor", "ledger_tol", "normalize",
            "box_side", "sigma_sweep"});
    PipelineOptions& p = cfg.compactify;
    c.get("sigma", p.sigma);
    c.get("max_doublings", p.max_doublings);
    c.get("a_ratio", p.a_ratio);
    c.get("epsilon0", p.epsilon0);
    c.get("sc_tol", p.sc_tol);
    c.get("sc_floor", p.sc_floor);
    c.get("ledger_tol", p.ledger_tol);
    c.get("normalize", p.normalize);
    c.get("box_side", p.box_side);
    c.get("sigma_sweep", cfg.sigma_sweep);
    require(p.sigma > 0.0 && p.max_doublings >= 0, ErrorKind::kConfig, "compactify.sigma must be positive");
  }
  cfg.compactify.solver = cfg.solver;
  if (root.has("rigidity")) {
    const auto r = root.child("rigidity");
    r.only({"chi_radius", "first_variation", "eta", "t_values"});
    r.get("chi_radius", cfg.rigidity.chi_radius);
    r.get("first_variation", cfg.rigidity.first_variation);
    r.get("eta", cfg.rigidity.eta);
    r.get("t_values", cfg.rigidity.t_values);
    require(cfg.rigidity.eta.size() == 4 && std::is_sorted(cfg.rigidity.eta.begin(), cfg.rigidity.eta.end()),
            ErrorKind::kConfig, "rigidity.eta must be four increasing radii");
    require(cfg.rigidity.t_values.size() >= 2, ErrorKind::kConfig, "rigidity.t_values needs at least two entries");
  }

  if (cfg.metric.container.empty()) {
    require(cfg.chart.node_count() <= cfg.node_cap, ErrorKind::kConfig,
            "chart has " + std::to_string(cfg.chart.node_count()) + " nodes, above node_cap " +
                std::to_string(cfg.node_cap));
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(read_json(path)); }

/// Builds the chart and metric; chart problems are configuration errors.
inline MetricField instantiate_metric(const ExperimentConfig& cfg) {
  if (!cfg.metric.container.empty()) {
    MetricField m = read_metric(cfg.metric.container);
    require(m.chart->size() <= cfg.node_cap, ErrorKind::kConfig, "container chart exceeds node_cap");
    return m;
  }
  try {
    const ChartPtr chart = build_chart(cfg.chart.k, cfg.chart.n, cfg.chart.fiber, cfg.chart.radial, cfg.chart.angular);
    return sample_golden(chart, cfg.metric.name, cfg.metric.params);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDomain) fail(ErrorKind::kConfig, e.what());
    throw;
  }
}

/// FNV-1a of the canonical config text; stable across runs and platforms.
inline std::string config_digest(const nlohmann::json& j) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fml
