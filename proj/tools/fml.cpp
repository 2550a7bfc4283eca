#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "fml/cli/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"fml: mass, Green's function, conformal, compactification and rigidity experiments"};
  std::string task, config_path, out;
  bool resume = false, list = false;
  app.add_option("task", task, "mass | green | conformal | compactify | rigidity | all")
      ->check(CLI::IsMember({"mass", "green", "conformal", "compactify", "rigidity", "all"}));
  app.add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", out, "run directory (default: the config's output entry)");
  app.add_flag("--resume", resume, "skip stages already completed with the same config");
  app.add_flag("--list-metrics", list, "print the built-in metric registry and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fml::kExitConfig;
  }
  if (list) {
    for (const auto& name : fml::registry_list()) std::cout << name << "\n";
    return 0;
  }
  if (task.empty() || config_path.empty()) {
    std::cerr << "error: a task and --config are required\n" << app.help();
    return fml::kExitConfig;
  }
  try {
    const fml::ExperimentConfig cfg = fml::load_config(config_path);
    const fml::RunReport rep = fml::run(task, cfg, out.empty() ? cfg.output : out, {resume});
    for (const auto& s : rep.stages) std::cout << s.name << ": " << s.status << "\n";
    std::cout << "run directory: " << rep.out.string() << "\n";
    return rep.exit_code;
  } catch (const fml::Error& e) {
    std::cerr << "error (" << fml::error_kind_name(e.kind()) << "): " << e.what() << "\n";
    return fml::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fml::kExitConfig;
  }
}
