// icadyn: finite-n simulation and scaling-limit solvers for online ICA.

#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "icadyn/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Online ICA: finite-n simulation, order-parameter ODE and Fokker-Planck PDE"};
  app.require_subcommand(1);

  std::string config, out = "out";
  std::optional<std::uint64_t> seed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());

  const char* names[] = {"simulate", "ode", "pde", "decoupled", "compare", "roc", "bifurcation"};
  const char* help[] = {
      "run finite-n trials of the online update",
      "integrate the order-parameter ODE (phi = none)",
      "solve the Fokker-Planck PDE",
      "run decoupled particles driven by the PDE couplings",
      "compare simulation against the ODE or the PDE",
      "support-recovery ROC from simulation and PDE",
      "fixed points and critical step size of the cubic ODE",
  };
  std::string chosen;
  for (int i = 0; i < 7; ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "root seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->callback([&chosen, name = names[i]] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : icadyn::cli::kExitConfig;
  }

  // The subcommand names the experiment; a config that names another one is
  // rejected rather than silently overridden.
  nlohmann::json j;
  try {
    j = icadyn::cli::read_config_file(config);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return icadyn::cli::kExitConfig;
  }
  if (!j.is_object()) {
    std::cerr << "config error: expected a JSON object\n";
    return icadyn::cli::kExitConfig;
  }
  if (!j.contains("experiment")) j["experiment"] = chosen;
  if (j["experiment"] != chosen) {
    std::cerr << "config error: subcommand '" << chosen << "' does not match config experiment "
              << j["experiment"].dump() << "\n";
    return icadyn::cli::kExitConfig;
  }
  return icadyn::cli::execute(std::move(j), out, seed, threads);
}
