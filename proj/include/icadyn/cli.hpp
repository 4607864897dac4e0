#pragma once

// Experiment driver behind the `icadyn` command-line tool: config parsing and
// validation, the seven experiments, CSV emission and the run manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icadyn/coeffs.hpp"
#include "icadyn/grid.hpp"
#include "icadyn/model.hpp"
#include "icadyn/pde.hpp"
#include "icadyn/simulate.hpp"

namespace icadyn::cli {

inline constexpr const char* kVersion = "1.0.0";

enum class Experiment { simulate, ode, pde, decoupled, compare, roc, bifurcation };

Experiment parse_experiment(const std::string& name);
std::string experiment_name(Experiment e);

struct GridSpec {
  std::optional<double> x_min, x_max;  // both or neither; otherwise automatic
  double half_width = 8.0;
  std::size_t n_cells = 1024;
};

struct RunConfig {
  nlohmann::json raw;  // as read, for the manifest
  Experiment experiment = Experiment::simulate;
  std::uint64_t seed = 0;

  // model
  std::size_t n = 1000;
  PriorMeasure prior = PriorMeasure::point(1.0);
  SourceDist source = SourceDist::rademacher();
  double q0 = 0.0;
  FeatureMode feature_mode = FeatureMode::deterministic;

  // algorithm
  Nonlinearity f{Nonlinearity::Kind::neg_cube};
  Regularizer phi;
  StepSchedule schedule = StepSchedule::constant(0.1);
  double T = 0.0;

  // numerics
  double record_dt = 0.1;
  double ode_dt = 1e-3;
  int nodes = CoeffContext::kDefaultNodes;
  std::size_t trials = 1;
  GridSpec grid;
  double pde_dt_max = 0.05;
  double pde_safety = 0.9;
  FluxScheme flux = FluxScheme::exponential_fitting;
  std::size_t particles = 100000;
  double steps_per_unit_time = 0.0;  // 0: one Euler step per particle (dt = 1/particles)
  std::vector<double> snapshot_times;

  // sign of G
  std::optional<int> g_sign_fixed;  // empty: calibrate
  std::size_t calib_n = 1000;
  std::size_t calib_samples = 20000;
  double calib_probe_q = 0.64;

  // compare
  enum class Target { ode, pde } compare_target = Target::ode;
  double band_abs = 0.05;
  double band_sigma = 2.0;
  double ks_max = 0.05;
  double ks_max_decoupled = 0.02;
  double q_tol = 0.05;

  // roc
  std::vector<double> roc_times;
  std::size_t threshold_count = 200;
  double roc_tol = 0.03;

  // bifurcation
  std::vector<double> taus{0.02, 0.04, 0.06, 0.08};
  std::size_t q_points = 200;

  CoeffContext context(int g_sign) const;
  Grid1D make_grid() const;
};

// Parses and validates every field against the preconditions of the modules
// the experiment will call. Throws ConfigError (or DomainError) on the first
// problem; nothing is computed.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
// JSON with comments allowed; throws ConfigError on I/O or syntax errors.
nlohmann::json read_config_file(const std::filesystem::path& path);

struct OutputFile {
  std::string name;
  std::string content;
};

struct Check {
  std::string name;
  bool pass = true;
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
};

struct RunResult {
  std::vector<OutputFile> files;
  std::vector<Check> checks;
  nlohmann::json info = nlohmann::json::object();   // experiment-specific summary
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json g_sign = nlohmann::json::object(); // value, source, evidence

  bool passed() const;
};

RunResult cmd_simulate(const RunConfig& cfg, unsigned threads);
RunResult cmd_ode(const RunConfig& cfg, unsigned threads);
RunResult cmd_pde(const RunConfig& cfg, unsigned threads);
RunResult cmd_decoupled(const RunConfig& cfg, unsigned threads);
RunResult cmd_compare(const RunConfig& cfg, unsigned threads);
RunResult cmd_roc(const RunConfig& cfg, unsigned threads);
RunResult cmd_bifurcation(const RunConfig& cfg, unsigned threads);

RunResult run(const RunConfig& cfg, unsigned threads);

// Exit codes.
inline constexpr int kExitPass = 0;
inline constexpr int kExitTolerance = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitNumeric = 4;

std::string sha256_hex(const std::string& data);

// Writes every CSV plus manifest.json into `out_dir` (created if missing).
nlohmann::json write_outputs(const RunConfig& cfg, const RunResult& result, const std::filesystem::path& out_dir,
                             double wall_seconds, unsigned threads);

// Full pipeline: validate, run, write. `seed` replaces the config's seed.
// Returns the exit code and prints a one-line report per check to stderr.
int execute(nlohmann::json config, const std::filesystem::path& out_dir, std::optional<std::uint64_t> seed,
            unsigned threads);

}  // namespace icadyn::cli
