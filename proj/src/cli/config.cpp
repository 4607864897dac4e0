#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "icadyn/cli.hpp"
#include "icadyn/errors.hpp"

namespace icadyn::cli {

using nlohmann::json;

Experiment parse_experiment(const std::string& name) {
  if (name == "simulate") return Experiment::simulate;
  if (name == "ode") return Experiment::ode;
  if (name == "pde") return Experiment::pde;
  if (name == "decoupled") return Experiment::decoupled;
  if (name == "compare") return Experiment::compare;
  if (name == "roc") return Experiment::roc;
  if (name == "bifurcation") return Experiment::bifurcation;
  throw ConfigError("unknown experiment '" + name +
                    "' (expected simulate, ode, pde, decoupled, compare, roc, bifurcation)");
}

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::simulate: return "simulate";
    case Experiment::ode: return "ode";
    case Experiment::pde: return "pde";
    case Experiment::decoupled: return "decoupled";
    case Experiment::compare: return "compare";
    case Experiment::roc: return "roc";
    case Experiment::bifurcation: return "bifurcation";
  }
  return "?";
}

CoeffContext RunConfig::context(int g_sign) const {
  return CoeffContext(f, phi, source, schedule.is_constant() ? schedule.tau0() : schedule(0.0), g_sign, nodes);
}

Grid1D RunConfig::make_grid() const {
  if (grid.x_min) return Grid1D(*grid.x_min, *grid.x_max, grid.n_cells);
  return auto_grid(prior, q0, grid.n_cells, grid.half_width);
}

namespace {

void allow_keys(const json& obj, const std::string& where, std::set<std::string> keys) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : obj.items()) {
    if (!keys.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

double get_number(const json& obj, const std::string& key, const std::string& where) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(where + "." + key + ": must be finite");
  return d;
}

double number_or(const json& obj, const std::string& key, const std::string& where, double fallback) {
  return obj.contains(key) ? get_number(obj, key, where) : fallback;
}

std::size_t count_or(const json& obj, const std::string& key, const std::string& where, std::size_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + "." + key + ": expected a nonnegative integer");
  }
  return v.get<std::size_t>();
}

std::vector<double> numbers_or(const json& obj, const std::string& key, const std::string& where,
                               std::vector<double> fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(where + "." + key + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<Atom> parse_atoms(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array of [value, weight]");
  std::vector<Atom> atoms;
  for (const auto& e : v) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      throw ConfigError(where + ": each atom is [value, weight]");
    }
    atoms.push_back({e[0].get<double>(), e[1].get<double>()});
  }
  return atoms;
}

PriorMeasure parse_prior(const json& v) {
  if (v.is_string()) {
    if (v == "point") return PriorMeasure::point(1.0);
    throw ConfigError("model.prior: unknown prior '" + v.get<std::string>() + "'");
  }
  allow_keys(v, "model.prior", {"kind", "rho", "atoms"});
  const auto kind = v.value("kind", std::string("point"));
  if (kind == "point") return PriorMeasure::point(1.0);
  if (kind == "sparse") {
    const double rho = get_number(v, "rho", "model.prior");
    if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("model.prior.rho must be in (0, 1]");
    return PriorMeasure::sparse(rho);
  }
  if (kind == "atoms") return PriorMeasure(parse_atoms(v.at("atoms"), "model.prior.atoms"));
  throw ConfigError("model.prior.kind: unknown kind '" + kind + "' (expected point, sparse, atoms)");
}

SourceDist parse_source(const json& v) {
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "rademacher") return SourceDist::rademacher();
    if (s == "three_point") return SourceDist::three_point();
    if (s == "gaussian") return SourceDist::gaussian_matching(8);
    throw ConfigError("model.source: unknown source '" + s + "' (expected rademacher, three_point, gaussian)");
  }
  allow_keys(v, "model.source", {"atoms"});
  return SourceDist(parse_atoms(v.at("atoms"), "model.source.atoms"));
}

StepSchedule parse_tau(const json& v) {
  if (v.is_number()) {
    const double tau = v.get<double>();
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("algorithm.tau must be > 0");
    return StepSchedule::constant(tau);
  }
  if (!v.is_array() || v.empty()) throw ConfigError("algorithm.tau: expected a number or [[t, tau], ...]");
  std::vector<std::pair<double, double>> knots;
  for (const auto& e : v) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
      throw ConfigError("algorithm.tau: each knot is [t, tau]");
    }
    const double t = e[0].get<double>(), tau = e[1].get<double>();
    if (!(tau > 0.0)) throw ConfigError("algorithm.tau: step sizes must be > 0");
    if (!knots.empty() && !(t > knots.back().first)) throw ConfigError("algorithm.tau: knot times must increase");
    knots.emplace_back(t, tau);
  }
  return StepSchedule::table(std::move(knots));
}

void check_times(const std::vector<double>& times, double T, const std::string& what) {
  for (double t : times) {
    if (!(t >= 0.0 && t <= T)) {
      throw ConfigError(what + ": time " + std::to_string(t) + " outside [0, T = " + std::to_string(T) + "]");
    }
  }
}

RunConfig parse_checked(const json& j) {
  allow_keys(j, "config",
             {"experiment", "seed", "model", "algorithm", "numerics", "g_sign", "calibration", "compare", "roc",
              "bifurcation", "description"});
  RunConfig c;
  c.raw = j;
  if (!j.contains("experiment") || !j["experiment"].is_string()) throw ConfigError("config.experiment is required");
  c.experiment = parse_experiment(j["experiment"].get<std::string>());
  if (j.contains("seed")) {
    const auto& seed = j["seed"];
    const bool ok = seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<long long>() >= 0);
    if (!ok) throw ConfigError("config.seed: expected a nonnegative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }

  const json empty = json::object();
  const auto& m = j.contains("model") ? j["model"] : empty;
  allow_keys(m, "model", {"n", "prior", "source", "q0", "feature_mode"});
  c.n = count_or(m, "n", "model", c.n);
  if (m.contains("prior")) c.prior = parse_prior(m["prior"]);
  if (m.contains("source")) c.source = parse_source(m["source"]);
  c.q0 = number_or(m, "q0", "model", c.q0);
  if (m.contains("feature_mode")) {
    const auto fm = m["feature_mode"].get<std::string>();
    if (fm == "deterministic") {
      c.feature_mode = FeatureMode::deterministic;
    } else if (fm == "iid") {
      c.feature_mode = FeatureMode::iid;
    } else {
      throw ConfigError("model.feature_mode: expected deterministic or iid");
    }
  }

  const auto& a = j.contains("algorithm") ? j["algorithm"] : empty;
  allow_keys(a, "algorithm", {"f", "phi", "beta", "tau", "T"});
  if (a.contains("f")) c.f = Nonlinearity::parse(a["f"].get<std::string>());
  const double beta = number_or(a, "beta", "algorithm", 0.0);
  if (a.contains("phi")) c.phi = Regularizer::parse(a["phi"].get<std::string>(), beta);
  if (a.contains("tau")) c.schedule = parse_tau(a["tau"]);
  c.T = number_or(a, "T", "algorithm", c.T);

  const auto& nm = j.contains("numerics") ? j["numerics"] : empty;
  allow_keys(nm, "numerics",
             {"record_dt", "ode_dt", "nodes", "trials", "grid", "pde_dt_max", "pde_safety", "flux", "particles",
              "steps_per_unit_time", "snapshot_times"});
  c.record_dt = number_or(nm, "record_dt", "numerics", c.record_dt);
  c.ode_dt = number_or(nm, "ode_dt", "numerics", c.ode_dt);
  c.nodes = static_cast<int>(count_or(nm, "nodes", "numerics", static_cast<std::size_t>(c.nodes)));
  c.trials = count_or(nm, "trials", "numerics", c.trials);
  if (nm.contains("grid")) {
    const auto& g = nm["grid"];
    allow_keys(g, "numerics.grid", {"n_cells", "half_width", "x_min", "x_max"});
    c.grid.n_cells = count_or(g, "n_cells", "numerics.grid", c.grid.n_cells);
    c.grid.half_width = number_or(g, "half_width", "numerics.grid", c.grid.half_width);
    if (g.contains("x_min") != g.contains("x_max")) {
      throw ConfigError("numerics.grid: give both x_min and x_max, or neither");
    }
    if (g.contains("x_min")) {
      c.grid.x_min = get_number(g, "x_min", "numerics.grid");
      c.grid.x_max = get_number(g, "x_max", "numerics.grid");
    }
  }
  c.pde_dt_max = number_or(nm, "pde_dt_max", "numerics", c.pde_dt_max);
  c.pde_safety = number_or(nm, "pde_safety", "numerics", c.pde_safety);
  if (nm.contains("flux")) {
    const auto fl = nm["flux"].get<std::string>();
    if (fl == "exponential_fitting") {
      c.flux = FluxScheme::exponential_fitting;
    } else if (fl == "upwind") {
      c.flux = FluxScheme::upwind;
    } else {
      throw ConfigError("numerics.flux: expected exponential_fitting or upwind");
    }
  }
  c.particles = count_or(nm, "particles", "numerics", c.particles);
  c.steps_per_unit_time = number_or(nm, "steps_per_unit_time", "numerics", c.steps_per_unit_time);
  c.snapshot_times = numbers_or(nm, "snapshot_times", "numerics", {});

  if (j.contains("g_sign")) {
    const auto& g = j["g_sign"];
    if (g.is_string() && g == "auto") {
      c.g_sign_fixed.reset();
    } else if (g.is_number_integer() && (g.get<int>() == 1 || g.get<int>() == -1)) {
      c.g_sign_fixed = g.get<int>();
    } else {
      throw ConfigError("g_sign: expected \"auto\", 1 or -1");
    }
  }
  const auto& cal = j.contains("calibration") ? j["calibration"] : empty;
  allow_keys(cal, "calibration", {"n", "samples", "probe_q"});
  c.calib_n = count_or(cal, "n", "calibration", c.calib_n);
  c.calib_samples = count_or(cal, "samples", "calibration", c.calib_samples);
  c.calib_probe_q = number_or(cal, "probe_q", "calibration", c.calib_probe_q);

  const auto& cmp = j.contains("compare") ? j["compare"] : empty;
  allow_keys(cmp, "compare", {"target", "band_abs", "band_sigma", "ks_max", "ks_max_decoupled", "q_tol"});
  if (cmp.contains("target")) {
    const auto t = cmp["target"].get<std::string>();
    if (t == "ode") {
      c.compare_target = RunConfig::Target::ode;
    } else if (t == "pde") {
      c.compare_target = RunConfig::Target::pde;
    } else {
      throw ConfigError("compare.target: expected ode or pde");
    }
  }
  c.band_abs = number_or(cmp, "band_abs", "compare", c.band_abs);
  c.band_sigma = number_or(cmp, "band_sigma", "compare", c.band_sigma);
  c.ks_max = number_or(cmp, "ks_max", "compare", c.ks_max);
  c.ks_max_decoupled = number_or(cmp, "ks_max_decoupled", "compare", c.ks_max_decoupled);
  c.q_tol = number_or(cmp, "q_tol", "compare", c.q_tol);

  const auto& roc = j.contains("roc") ? j["roc"] : empty;
  allow_keys(roc, "roc", {"times", "thresholds", "tol"});
  c.roc_times = numbers_or(roc, "times", "roc", {});
  c.threshold_count = count_or(roc, "thresholds", "roc", c.threshold_count);
  c.roc_tol = number_or(roc, "tol", "roc", c.roc_tol);

  const auto& bif = j.contains("bifurcation") ? j["bifurcation"] : empty;
  allow_keys(bif, "bifurcation", {"taus", "q_points"});
  c.taus = numbers_or(bif, "taus", "bifurcation", c.taus);
  c.q_points = count_or(bif, "q_points", "bifurcation", c.q_points);

  // Cross-field preconditions, grouped by the modules each experiment uses.
  const auto e = c.experiment;
  const bool uses_sim = e == Experiment::simulate || e == Experiment::compare || e == Experiment::roc;
  const bool uses_pde = e == Experiment::pde || e == Experiment::decoupled || e == Experiment::roc ||
                        (e == Experiment::compare && c.compare_target == RunConfig::Target::pde);
  const bool uses_ode = e == Experiment::ode || (e == Experiment::compare && c.compare_target == RunConfig::Target::ode);

  if (!(c.q0 >= 0.0 && c.q0 <= 1.0)) throw ConfigError("model.q0 must be in [0, 1] (|Q0| <= 1)");
  if (!(c.T >= 0.0)) throw ConfigError("algorithm.T must be >= 0");
  if (!(c.record_dt > 0.0)) throw ConfigError("numerics.record_dt must be > 0");
  if (!(c.ode_dt > 0.0)) throw ConfigError("numerics.ode_dt must be > 0");
  if (c.nodes < 1 || c.nodes > 200) throw ConfigError("numerics.nodes must be in [1, 200]");
  if (c.trials < 1) throw ConfigError("numerics.trials must be >= 1");
  if (!(c.pde_dt_max > 0.0)) throw ConfigError("numerics.pde_dt_max must be > 0");
  if (!(c.pde_safety > 0.0 && c.pde_safety <= 1.0)) throw ConfigError("numerics.pde_safety must be in (0, 1]");
  if (c.particles < 1) throw ConfigError("numerics.particles must be >= 1");
  if (!(c.steps_per_unit_time >= 0.0)) throw ConfigError("numerics.steps_per_unit_time must be >= 0");
  if (c.calib_n < 2 || c.calib_samples < 100) throw ConfigError("calibration: n >= 2 and samples >= 100 required");
  if (!(c.calib_probe_q > 0.0 && c.calib_probe_q < 1.0)) throw ConfigError("calibration.probe_q must be in (0, 1)");
  if (!(c.band_abs >= 0.0 && c.band_sigma >= 0.0 && c.ks_max >= 0.0 && c.q_tol >= 0.0 && c.roc_tol >= 0.0)) {
    throw ConfigError("tolerances must be >= 0");
  }
  check_times(c.snapshot_times, c.T, "numerics.snapshot_times");
  std::sort(c.snapshot_times.begin(), c.snapshot_times.end());
  c.snapshot_times.erase(std::unique(c.snapshot_times.begin(), c.snapshot_times.end()), c.snapshot_times.end());

  if (uses_sim && c.n < 2) throw ConfigError("model.n must be >= 2");
  if (uses_ode && c.phi.kind() != Regularizer::Kind::none) {
    throw ConfigError("the order-parameter ODE closes only for phi = none; use the pde experiment");
  }
  if (uses_pde || uses_sim) {
    if (c.grid.n_cells < 64) throw ConfigError("numerics.grid.n_cells must be >= 64");
    if (c.grid.n_cells % 2 != 0) throw ConfigError("numerics.grid.n_cells must be even");
  }
  if (uses_pde) {
    if (c.q0 >= 1.0) throw ConfigError("model.q0 = 1 is a point mass; the PDE needs q0 < 1");
    // Grid width and initial boundary mass.
    (void)init_density(c.prior, c.q0, c.make_grid());
  } else if (uses_sim && (!c.snapshot_times.empty() || !c.roc_times.empty())) {
    (void)c.make_grid();
  }
  if (e == Experiment::compare && c.compare_target == RunConfig::Target::pde && c.snapshot_times.empty()) {
    throw ConfigError("compare with target pde needs numerics.snapshot_times");
  }
  if (e == Experiment::roc) {
    if (c.roc_times.empty()) throw ConfigError("roc.times must list at least one run time");
    check_times(c.roc_times, c.T, "roc.times");
    std::sort(c.roc_times.begin(), c.roc_times.end());
    c.roc_times.erase(std::unique(c.roc_times.begin(), c.roc_times.end()), c.roc_times.end());
    if (c.prior.zero_atom() < 0 || c.prior.atoms().size() < 2) {
      throw ConfigError("roc needs a prior with a zero atom and a nonzero atom");
    }
    if (c.threshold_count < 2) throw ConfigError("roc.thresholds must be >= 2");
  }
  if (e == Experiment::bifurcation) {
    if (c.f.kind() != Nonlinearity::Kind::cube && c.f.kind() != Nonlinearity::Kind::neg_cube) {
      throw ConfigError("bifurcation needs f = cube or neg_cube");
    }
    if (c.taus.empty()) throw ConfigError("bifurcation.taus must not be empty");
    for (double t : c.taus) {
      if (!(t > 0.0)) throw ConfigError("bifurcation.taus must be > 0");
    }
    if (c.q_points < 2) throw ConfigError("bifurcation.q_points must be >= 2");
  }
  if (e == Experiment::decoupled && c.steps_per_unit_time == 0.0 && c.particles > 1000000) {
    throw ConfigError("decoupled: set numerics.steps_per_unit_time for more than 1e6 particles");
  }
  return c;
}

}  // namespace

RunConfig parse_config(const json& j) {
  try {
    return parse_checked(j);
  } catch (const json::exception& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_config_file(path)); }

}  // namespace icadyn::cli
