#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <fmt/format.h>

#include "icadyn/cli.hpp"
#include "icadyn/errors.hpp"
#include "icadyn/metrics.hpp"
#include "icadyn/ode.hpp"
#include "icadyn/parallel.hpp"

namespace icadyn::cli {

using nlohmann::json;

bool RunResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

namespace {

// Stream indices under the root seed.
constexpr std::uint64_t kTrialStream = 100;
constexpr std::uint64_t kCalibrationStream = 200;
constexpr std::uint64_t kDecoupledStream = 300;
constexpr std::uint64_t kFeatureStream = 400;

class Csv {
public:
  explicit Csv(const std::string& header) { buf_ += header + "\n"; }

  template <class... Args>
  void row(Args&&... cells) {
    bool first = true;
    (append(cells, first), ...);
    buf_ += '\n';
  }

  OutputFile file(std::string name) const { return {std::move(name), buf_}; }

private:
  void append(double v, bool& first) { put(num(v), first); }
  void append(int v, bool& first) { put(std::to_string(v), first); }
  void append(std::size_t v, bool& first) { put(std::to_string(v), first); }
  void append(const std::string& v, bool& first) { put(v, first); }
  void append(const char* v, bool& first) { put(v, first); }
  void put(const std::string& s, bool& first) {
    if (!first) buf_ += ',';
    buf_ += s;
    first = false;
  }

public:
  static std::string num(double v) {
    if (std::isnan(v)) return "";
    return fmt::format("{:.10g}", v);
  }

private:
  std::string buf_;
};

std::shared_ptr<const FeatureVector> make_feature(const RunConfig& cfg, std::size_t n) {
  return std::make_shared<const FeatureVector>(
      feature_from_prior(n, cfg.prior, cfg.feature_mode, derive_seed(cfg.seed, {kFeatureStream})));
}

std::uint64_t trial_seed(const RunConfig& cfg, std::size_t k) {
  return derive_seed(cfg.seed, {kTrialStream, static_cast<std::uint64_t>(k)});
}

int resolve_g_sign(const RunConfig& cfg, unsigned threads, RunResult& res) {
  if (cfg.g_sign_fixed) {
    res.g_sign = {{"value", *cfg.g_sign_fixed}, {"source", "config"}};
    return *cfg.g_sign_fixed;
  }
  const auto seed = derive_seed(cfg.seed, {kCalibrationStream});
  const auto xi = std::make_shared<const FeatureVector>(
      feature_from_prior(cfg.calib_n, cfg.prior, FeatureMode::deterministic, seed));
  const auto cal = calibrate_g_sign(cfg.context(+1), xi, cfg.calib_probe_q, cfg.calib_samples, seed, threads);
  const int sign = cal.conclusive ? cal.g_sign : +1;
  res.g_sign = {{"value", sign},
                {"source", cal.conclusive ? "calibration" : "calibration inconclusive; default +1"},
                {"evidence",
                 {{"chi2_plus", cal.chi2_plus},
                  {"chi2_minus", cal.chi2_minus},
                  {"conclusive", cal.conclusive},
                  {"probe_Q", cal.probe_Q},
                  {"n", cal.n},
                  {"samples", cal.samples},
                  {"coordinates", cal.coords}}}};
  res.seeds["calibration"] = seed;
  return sign;
}

std::vector<Trajectory> run_trials(const RunConfig& cfg, const CoeffContext& ctx,
                                   std::shared_ptr<const FeatureVector> xi, std::size_t trials,
                                   std::vector<double> snapshot_times, bool keep_states, unsigned threads,
                                   RunResult& res) {
  std::vector<Trajectory> out(trials);
  std::optional<Grid1D> grid;
  if (!snapshot_times.empty()) grid = cfg.make_grid();
  json seeds = json::array();
  for (std::size_t k = 0; k < trials; ++k) seeds.push_back(trial_seed(cfg, k));
  res.seeds["trials"] = seeds;
  parallel_for(trials, threads, [&](std::size_t k) {
    TrialConfig tc{xi, ctx, cfg.schedule, cfg.q0, cfg.T, cfg.record_dt, snapshot_times, grid, keep_states,
                   trial_seed(cfg, k)};
    out[k] = run_trial(tc);
  });
  return out;
}

PdeSolution run_pde(const RunConfig& cfg, const CoeffContext& ctx, std::vector<double> snapshot_times) {
  PdeConfig pc{cfg.prior, ctx, cfg.schedule, cfg.q0, cfg.T, cfg.make_grid(), std::move(snapshot_times),
               cfg.pde_dt_max, cfg.pde_safety, cfg.flux};
  return solve(pc);
}

void add_pde_checks(const PdeSolution& sol, RunResult& res) {
  const auto& d = sol.diagnostics;
  res.checks.push_back({"pde mass conservation", d.max_mass_drift <= 1e-8, d.max_mass_drift, 1e-8, ""});
  res.checks.push_back({"pde positivity", d.min_density >= -1e-12, d.min_density, -1e-12,
                        fmt::format("{} cells clipped", d.clipped)});
  const double m2 = std::max(std::abs(d.min_second_moment - 1.0), std::abs(d.max_second_moment - 1.0));
  res.checks.push_back({"pde second moment", m2 <= 0.02, m2, 0.02, ""});
  res.info["pde"] = {{"steps", d.steps},
                     {"max_mass_drift", d.max_mass_drift},
                     {"min_density_before_clip", d.min_density},
                     {"clipped_cells", d.clipped},
                     {"second_moment_range", {d.min_second_moment, d.max_second_moment}},
                     {"max_boundary_mass", d.max_boundary_mass}};
}

OutputFile path_csv(const std::string& name, const std::vector<double>& t, const std::vector<double>& Q,
                    const std::vector<double>& R) {
  Csv csv("t,Q,R");
  for (std::size_t k = 0; k < t.size(); ++k) csv.row(t[k], Q[k], R[k]);
  return csv.file(name);
}

OutputFile density_csv(const std::string& name, const std::vector<GridDensity>& snaps) {
  Csv csv("t,xi_atom,x,density");
  for (const auto& s : snaps) {
    for (const auto& a : s.atoms) {
      for (std::size_t i = 0; i < s.grid.n_cells; ++i) csv.row(s.t, a.xi, s.grid.center(i), a.density[i]);
    }
  }
  return csv.file(name);
}

void append_histograms(Csv& csv, const Snapshot& s, const std::vector<double>& atom_values,
                       const std::string& prefix_trial = "") {
  for (std::size_t j = 0; j < s.per_atom.size(); ++j) {
    const auto& h = s.per_atom[j];
    const auto dens = h.density();
    for (std::size_t i = 0; i < h.grid.n_cells; ++i) {
      if (prefix_trial.empty()) {
        csv.row(s.t, atom_values[j], h.grid.center(i), dens[i]);
      } else {
        csv.row(prefix_trial, s.t, atom_values[j], h.grid.center(i), dens[i]);
      }
    }
  }
}

// Index of the PDE atom whose value equals `xi`.
std::size_t atom_index(const GridDensity& d, double xi) {
  for (std::size_t j = 0; j < d.atoms.size(); ++j) {
    if (std::abs(d.atoms[j].xi - xi) <= 1e-12 * std::max(1.0, std::abs(xi))) return j;
  }
  throw NumericError("no PDE atom with xi = " + std::to_string(xi));
}

// Feature vectors are rescaled to ||xi||^2 = n, so their atom values can sit
// a rounding error away from the prior's; match by nearest prior atom.
std::size_t nearest_atom(const GridDensity& d, double xi) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < d.atoms.size(); ++j) {
    if (std::abs(d.atoms[j].xi - xi) < std::abs(d.atoms[best].xi - xi)) best = j;
  }
  return best;
}

double interp(const std::vector<double>& t, const std::vector<double>& y, double s) {
  if (s <= t.front()) return y.front();
  if (s >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), s);
  const auto k = static_cast<std::size_t>(it - t.begin());
  const double w = (s - t[k - 1]) / (t[k] - t[k - 1]);
  return y[k - 1] * (1.0 - w) + y[k] * w;
}

}  // namespace

RunResult cmd_simulate(const RunConfig& cfg, unsigned threads) {
  RunResult res;
  res.seeds["root"] = cfg.seed;
  res.g_sign = {{"value", nullptr}, {"source", "not used by the simulator"}};
  const auto xi = make_feature(cfg, cfg.n);
  res.seeds["feature"] = derive_seed(cfg.seed, {kFeatureStream});
  const auto trajs = run_trials(cfg, cfg.context(+1), xi, cfg.trials, cfg.snapshot_times, false, threads, res);

  Csv traj("trial,t,Q,R");
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    for (std::size_t r = 0; r < trajs[k].times.size(); ++r) traj.row(k, trajs[k].times[r], trajs[k].Q[r], trajs[k].R[r]);
  }
  res.files.push_back(traj.file("trajectories.csv"));

  Csv mean("t,q_mean,q_std,Q_mean");
  for (std::size_t r = 0; r < trajs[0].times.size(); ++r) {
    double s = 0.0, s2 = 0.0, sQ = 0.0;
    for (const auto& tr : trajs) {
      const double q = tr.Q[r] * tr.Q[r];
      s += q;
      s2 += q * q;
      sQ += tr.Q[r];
    }
    const double m = s / static_cast<double>(trajs.size());
    const double var = trajs.size() > 1 ? std::max(0.0, (s2 - s * m) / static_cast<double>(trajs.size() - 1)) : 0.0;
    mean.row(trajs[0].times[r], m, std::sqrt(var), sQ / static_cast<double>(trajs.size()));
  }
  res.files.push_back(mean.file("trajectory_mean.csv"));

  if (!cfg.snapshot_times.empty()) {
    Csv snaps("trial,t,xi_atom,x,density");
    for (std::size_t k = 0; k < trajs.size(); ++k) {
      for (const auto& s : trajs[k].snapshots) append_histograms(snaps, s, xi->atom_values, std::to_string(k));
    }
    res.files.push_back(snaps.file("snapshots.csv"));
  }
  res.info["final_Q"] = json::array();
  for (const auto& tr : trajs) res.info["final_Q"].push_back(tr.Q.back());
  return res;
}

RunResult cmd_ode(const RunConfig& cfg, unsigned threads) {
  RunResult res;
  res.seeds["root"] = cfg.seed;
  const int g_sign = resolve_g_sign(cfg, threads, res);
  const auto ctx = cfg.context(g_sign);
  const auto every = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.record_dt / cfg.ode_dt)));
  const auto sol = integrate(general_rhs(ctx, cfg.schedule), cfg.q0, cfg.T, cfg.ode_dt, every);
  Csv csv("t,q,Q");
  for (std::size_t k = 0; k < sol.times.size(); ++k) csv.row(sol.times[k], sol.q[k], sol.Q[k]);
  res.files.push_back(csv.file("ode.csv"));
  res.info["max_excursion"] = sol.max_excursion;
  res.info["final_q"] = sol.q.back();
  res.checks.push_back({"ode stays in [0, 1]", sol.max_excursion <= 1e-9, sol.max_excursion, 1e-9, ""});
  return res;
}

RunResult cmd_pde(const RunConfig& cfg, unsigned threads) {
  RunResult res;
  res.seeds["root"] = cfg.seed;
  const int g_sign = resolve_g_sign(cfg, threads, res);
  const auto sol = run_pde(cfg, cfg.context(g_sign), cfg.snapshot_times);
  res.files.push_back(path_csv("pde_path.csv", sol.times, sol.Q_path, sol.R_path));
  res.files.push_back(density_csv("pde_snapshots.csv", sol.snapshots));
  add_pde_checks(sol, res);
  res.info["final_Q"] = sol.Q_path.back();
  res.info["final_R"] = sol.R_path.back();
  return res;
}

RunResult cmd_decoupled(const RunConfig& cfg, unsigned threads) {
  RunResult res;
  res.seeds["root"] = cfg.seed;
  const int g_sign = resolve_g_sign(cfg, threads, res);
  const auto ctx = cfg.context(g_sign);
  const auto sol = run_pde(cfg, ctx, cfg.snapshot_times);
  add_pde_checks(sol, res);
  const CouplingPath path(sol.times, sol.Q_path, sol.R_path);
  const auto seed = derive_seed(cfg.seed, {kDecoupledStream});
  res.seeds["decoupled"] = seed;
  DecoupledConfig dc{cfg.prior,   cfg.particles,      ctx,  cfg.schedule, cfg.q0, cfg.T, cfg.steps_per_unit_time,
                     cfg.record_dt, cfg.snapshot_times, cfg.make_grid(), false, seed};
  const auto traj = run_decoupled(dc, path);

  res.files.push_back(path_csv("pde_path.csv", sol.times, sol.Q_path, sol.R_path));
  res.files.push_back(path_csv("decoupled_path.csv", traj.times, traj.Q, traj.R));
  std::vector<double> atom_values;
  for (const auto& a : cfg.prior.atoms()) atom_values.push_back(a.value);
  Csv snaps("t,xi_atom,x,density");
  for (const auto& s : traj.snapshots) append_histograms(snaps, s, atom_values);
  res.files.push_back(snaps.file("decoupled_snapshots.csv"));
  res.files.push_back(density_csv("pde_snapshots.csv", sol.snapshots));

  Csv dist("t,xi_atom,ks,w1");
  for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
    const auto& pd = sol.snapshots[s + 1];
    for (std::size_t j = 0; j < atom_values.size(); ++j) {
      const auto dd = density_distance(traj.snapshots[s].per_atom[j], pd, atom_index(pd, atom_values[j]));
      dist.row(traj.snapshots[s].t, atom_values[j], dd.ks, dd.w1);
      res.checks.push_back({fmt::format("decoupled vs pde KS t={} xi={}", Csv::num(traj.snapshots[s].t),
                                        Csv::num(atom_values[j])),
                            dd.ks <= cfg.ks_max_decoupled, dd.ks, cfg.ks_max_decoupled, ""});
    }
  }
  res.files.push_back(dist.file("decoupled_vs_pde.csv"));
  return res;
}

RunResult cmd_compare(const RunConfig& cfg, unsigned threads) {
  RunResult res;
  res.seeds["root"] = cfg.seed;
  const int g_sign = resolve_g_sign(cfg, threads, res);
  const auto ctx = cfg.context(g_sign);
  const auto xi = make_feature(cfg, cfg.n);
  res.seeds["feature"] = derive_seed(cfg.seed, {kFeatureStream});

  if (cfg.compare_target == RunConfig::Target::ode) {
    const auto trajs = run_trials(cfg, ctx, xi, cfg.trials, {}, false, threads, res);
    const auto ode = integrate(general_rhs(ctx, cfg.schedule), cfg.q0, cfg.T, cfg.ode_dt, 1);
    Csv csv("t,q_sim_mean,q_sim_std,q_ode,band,pass");
    Check band{"sim vs ode band", true, 0.0, 0.0, ""};
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < trajs[0].times.size(); ++r) {
      const double t = trajs[0].times[r];
      double s = 0.0, s2 = 0.0;
      for (const auto& tr : trajs) {
        const double q = tr.Q[r] * tr.Q[r];
        s += q;
        s2 += q * q;
      }
      const auto m = static_cast<double>(trajs.size());
      const double mean = s / m;
      const double sd = trajs.size() > 1 ? std::sqrt(std::max(0.0, (s2 - s * mean) / (m - 1.0))) : 0.0;
      const double q_ode = interp(ode.times, ode.q, t);
      const double tol = std::max(cfg.band_abs, cfg.band_sigma * sd);
      const double err = std::abs(mean - q_ode);
      const bool ok = err <= tol;
      csv.row(t, mean, sd, q_ode, tol, ok ? 1 : 0);
      // Report the point with the largest excess over its band.
      if (err - tol > worst) {
        worst = err - tol;
        band.value = err;
        band.limit = tol;
        band.detail = "worst at t = " + Csv::num(t);
      }
      if (!ok && band.pass) {
        band.pass = false;
        band.detail = "first violation at t = " + Csv::num(t);
        band.value = err;
        band.limit = tol;
        worst = std::numeric_limits<double>::infinity();
      }
    }
    res.checks.push_back(band);
    res.files.push_back(csv.file("compare_ode.csv"));
    Csv traj("trial,t,Q,R");
    for (std::size_t k = 0; k < trajs.size(); ++k) {
      for (std::size_t r = 0; r < trajs[k].times.size(); ++r) {
        traj.row(k, trajs[k].times[r], trajs[k].Q[r], trajs[k].R[r]);
      }
    }
    res.files.push_back(traj.file("trajectories.csv"));
    return res;
  }

  // Against the PDE: one simulation run, densities at the snapshot times.
  const auto trajs = run_trials(cfg, ctx, xi, 1, cfg.snapshot_times, false, threads, res);
  const auto& tr = trajs[0];
  const auto sol = run_pde(cfg, ctx, cfg.snapshot_times);
  add_pde_checks(sol, res);

  Csv q("t,Q_sim,Q_pde");
  double worst_q = 0.0;
  for (std::size_t r = 0; r < tr.times.size(); ++r) {
    const double qp = interp(sol.times, sol.Q_path, tr.times[r]);
    q.row(tr.times[r], tr.Q[r], qp);
    worst_q = std::max(worst_q, std::abs(tr.Q[r] - qp));
  }
  res.checks.push_back({"sim vs pde Q", worst_q <= cfg.q_tol, worst_q, cfg.q_tol, ""});
  res.files.push_back(q.file("compare_q.csv"));

  Csv dens("t,xi_atom,x,density_sim,density_pde");
  Csv dist("t,xi_atom,ks,w1");
  for (std::size_t s = 0; s < tr.snapshots.size(); ++s) {
    const auto& pd = sol.snapshots[s + 1];
    for (std::size_t j = 0; j < xi->atom_values.size(); ++j) {
      const auto pj = nearest_atom(pd, xi->atom_values[j]);
      const auto& h = tr.snapshots[s].per_atom[j];
      const auto ds = h.density();
      for (std::size_t i = 0; i < h.grid.n_cells; ++i) {
        dens.row(tr.snapshots[s].t, pd.atoms[pj].xi, h.grid.center(i), ds[i], pd.atoms[pj].density[i]);
      }
      const auto dd = density_distance(h, pd, pj);
      dist.row(tr.snapshots[s].t, pd.atoms[pj].xi, dd.ks, dd.w1);
      res.checks.push_back({fmt::format("sim vs pde KS t={} xi={}", Csv::num(tr.snapshots[s].t),
                                        Csv::num(pd.atoms[pj].xi)),
                            dd.ks <= cfg.ks_max, dd.ks, cfg.ks_max, ""});
    }
  }
  res.files.push_back(dens.file("compare_density.csv"));
  res.files.push_back(dist.file("compare_distance.csv"));
  res.files.push_back(path_csv("pde_path.csv", sol.times, sol.Q_path, sol.R_path));
  return res;
}

RunResult cmd_roc(const RunConfig& cfg, unsigned threads) {
  RunResult res;
  res.seeds["root"] = cfg.seed;
  const int g_sign = resolve_g_sign(cfg, threads, res);
  const auto ctx = cfg.context(g_sign);
  const auto xi = make_feature(cfg, cfg.n);
  res.seeds["feature"] = derive_seed(cfg.seed, {kFeatureStream});
  const auto trajs = run_trials(cfg, ctx, xi, 1, cfg.roc_times, true, threads, res);
  const auto sol = run_pde(cfg, ctx, cfg.roc_times);
  add_pde_checks(sol, res);
  const auto thresholds = default_thresholds(cfg.make_grid().x_max, cfg.threshold_count);

  Csv csv("t,source,threshold,tpr,fpr");
  res.info["auc"] = json::array();
  auto monotone = [](const RocCurve& r) {
    for (std::size_t k = 1; k < r.thresholds.size(); ++k) {
      if (r.tpr[k] > r.tpr[k - 1] || r.fpr[k] > r.fpr[k - 1]) return false;
    }
    return r.tpr.front() == 1.0 && r.fpr.front() == 1.0;
  };
  for (std::size_t s = 0; s < cfg.roc_times.size(); ++s) {
    const double t = cfg.roc_times[s];
    const auto sim = roc_from_simulation(trajs[0].snapshots[s].x, xi->values, thresholds);
    const auto pde = roc_from_pde(sol.snapshots[s + 1], thresholds);
    double dt = 0.0, df = 0.0;
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      csv.row(t, "sim", thresholds[k], sim.tpr[k], sim.fpr[k]);
      dt = std::max(dt, std::abs(sim.tpr[k] - pde.tpr[k]));
      df = std::max(df, std::abs(sim.fpr[k] - pde.fpr[k]));
    }
    for (std::size_t k = 0; k < thresholds.size(); ++k) csv.row(t, "pde", thresholds[k], pde.tpr[k], pde.fpr[k]);
    res.checks.push_back({"roc TPR t=" + Csv::num(t), dt <= cfg.roc_tol, dt, cfg.roc_tol, ""});
    res.checks.push_back({"roc FPR t=" + Csv::num(t), df <= cfg.roc_tol, df, cfg.roc_tol, ""});
    res.checks.push_back({"roc monotone t=" + Csv::num(t), monotone(sim) && monotone(pde), 0.0, 0.0, ""});
    res.info["auc"].push_back({{"t", t}, {"sim", auc(sim)}, {"pde", auc(pde)}});
  }
  res.files.push_back(csv.file("roc.csv"));
  return res;
}

RunResult cmd_bifurcation(const RunConfig& cfg, unsigned threads) {
  RunResult res;
  res.seeds["root"] = cfg.seed;
  const int g_sign = resolve_g_sign(cfg, threads, res);
  const int orientation = cubic_orientation(cfg.f, g_sign);
  const double m4 = cfg.source.m4(), m6 = cfg.source.m6();
  res.info["orientation"] = orientation;
  res.info["m4"] = m4;
  res.info["m6"] = m6;

  std::vector<double> taus = cfg.taus;
  std::sort(taus.begin(), taus.end());
  Csv curves("tau,q,g");
  std::vector<std::vector<double>> g(taus.size());
  for (std::size_t a = 0; a < taus.size(); ++a) {
    for (std::size_t k = 1; k <= cfg.q_points; ++k) {
      const double q = static_cast<double>(k) / static_cast<double>(cfg.q_points);
      g[a].push_back(rhs_example1(taus[a], q, m4, m6, orientation) / taus[a]);
      curves.row(taus[a], q, g[a].back());
    }
  }
  res.files.push_back(curves.file("bifurcation_curves.csv"));
  // Larger tau lies below on (0, 1): check on every interior grid point.
  bool ordered = true;
  for (std::size_t a = 1; a < taus.size(); ++a) {
    for (std::size_t k = 0; k + 1 < cfg.q_points; ++k) ordered = ordered && g[a][k] < g[a - 1][k];
  }
  if (taus.size() > 1) res.checks.push_back({"curves ordered by tau", ordered, 0.0, 0.0, ""});

  const auto bif = bifurcation(taus, m4, m6, orientation);
  Csv fp("tau,q_unstable,q_stable");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& b : bif.branches) fp.row(b.tau, b.q_unstable.value_or(nan), b.q_stable.value_or(nan));
  res.files.push_back(fp.file("fixed_points.csv"));
  Csv tc("tau_c");
  tc.row(bif.tau_c);
  res.files.push_back(tc.file("tau_c.csv"));
  res.info["tau_c"] = std::isnan(bif.tau_c) ? json(nullptr) : json(bif.tau_c);
  return res;
}

RunResult run(const RunConfig& cfg, unsigned threads) {
  switch (cfg.experiment) {
    case Experiment::simulate: return cmd_simulate(cfg, threads);
    case Experiment::ode: return cmd_ode(cfg, threads);
    case Experiment::pde: return cmd_pde(cfg, threads);
    case Experiment::decoupled: return cmd_decoupled(cfg, threads);
    case Experiment::compare: return cmd_compare(cfg, threads);
    case Experiment::roc: return cmd_roc(cfg, threads);
    case Experiment::bifurcation: return cmd_bifurcation(cfg, threads);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace icadyn::cli
