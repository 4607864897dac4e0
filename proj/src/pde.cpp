#include "icadyn/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "icadyn/errors.hpp"

namespace icadyn {

double GridDensity::mass(std::size_t atom) const {
  double s = 0.0;
  for (double p : atoms.at(atom).density) s += p;
  return s * grid.h();
}

double GridDensity::second_moment() const {
  const double h = grid.h();
  double total = 0.0;
  for (const auto& a : atoms) {
    double s = 0.0;
    for (std::size_t i = 0; i < grid.n_cells; ++i) {
      const double x = grid.center(i);
      s += x * x * a.density[i];
    }
    total += a.weight * s * h;
  }
  return total;
}

double GridDensity::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& a : atoms) {
    for (double p : a.density) m = std::min(m, p);
  }
  return m;
}

Grid1D auto_grid(const PriorMeasure& prior, double q0, std::size_t n_cells, double half_width) {
  if (!(q0 >= 0.0 && q0 < 1.0)) throw DomainError("auto_grid: q0 must be in [0, 1)");
  double reach = 0.0;
  for (const auto& a : prior.atoms()) reach = std::max(reach, std::abs(std::sqrt(q0) * a.value));
  const double L = std::max(half_width, reach + 6.0 * std::sqrt(1.0 - q0));
  if (n_cells % 2 == 1) ++n_cells;
  return Grid1D(-L, L, n_cells);
}

GridDensity init_density(const PriorMeasure& prior, double q0, const Grid1D& grid) {
  if (q0 == 1.0) throw DomainError("init_density: q0 = 1 needs a point mass; not supported");
  if (!(q0 >= 0.0 && q0 < 1.0)) throw DomainError("init_density: q0 must be in [0, 1)");
  const double sd = std::sqrt(1.0 - q0);
  GridDensity d{grid, {}, 0.0};
  for (const auto& atom : prior.atoms()) {
    const double mean = std::sqrt(q0) * atom.value;
    const double outside = 0.5 * std::erfc((mean - grid.x_min) / (sd * std::sqrt(2.0))) +
                           0.5 * std::erfc((grid.x_max - mean) / (sd * std::sqrt(2.0)));
    if (outside > 1e-6) {
      throw ConfigError("init_density: grid [" + std::to_string(grid.x_min) + ", " + std::to_string(grid.x_max) +
                        "] leaves mass " + std::to_string(outside) + " of atom xi = " + std::to_string(atom.value) +
                        " outside");
    }
    AtomDensity ad{atom.value, atom.weight, std::vector<double>(grid.n_cells)};
    double s = 0.0;
    for (std::size_t i = 0; i < grid.n_cells; ++i) {
      const double z = (grid.center(i) - mean) / sd;
      ad.density[i] = std::exp(-0.5 * z * z);
      s += ad.density[i];
    }
    const double scale = 1.0 / (s * grid.h());
    for (double& p : ad.density) p *= scale;
    d.atoms.push_back(std::move(ad));
  }
  return d;
}

Couplings compute_couplings(const GridDensity& d, const Regularizer& phi) {
  const double h = d.grid.h();
  double Q = 0.0, R = 0.0;
  for (const auto& a : d.atoms) {
    double sx = 0.0, sxphi = 0.0;
    for (std::size_t i = 0; i < d.grid.n_cells; ++i) {
      const double x = d.grid.center(i);
      sx += x * a.density[i];
      sxphi += x * phi.phi(x) * a.density[i];
    }
    Q += a.weight * a.xi * sx * h;
    R += a.weight * sxphi * h;
  }
  return {Q, R};
}

namespace {

// B(z) = z / (e^z - 1), with B(0) = 1.
double bernoulli(double z) {
  if (std::abs(z) < 1e-8) return 1.0 - 0.5 * z;
  if (z > 700.0) return 0.0;
  return z / std::expm1(z);
}

// Face flux F = a P_left - b P_right. `a` carries mass rightwards, `b` leftwards.
struct FaceCoeffs {
  std::vector<double> a;
  std::vector<double> b;
};

// Coefficients for interior faces 1..n-1 of one atom (index f-1 in the arrays).
void face_coeffs(const Grid1D& grid, const DriftCoefficients& dc, double xi, FluxScheme scheme,
                 std::vector<double>& a, std::vector<double>& b, std::vector<double>& v_cell) {
  const std::size_t n = grid.n_cells;
  const double h = grid.h();
  const double D = 0.5 * dc.Lambda;
  v_cell.resize(n);
  for (std::size_t i = 0; i < n; ++i) v_cell[i] = dc.gamma(grid.center(i), xi);
  a.resize(n - 1);
  b.resize(n - 1);
  for (std::size_t f = 0; f + 1 < n; ++f) {
    const double v = 0.5 * (v_cell[f] + v_cell[f + 1]);
    if (scheme == FluxScheme::upwind || D <= 0.0) {
      a[f] = std::max(v, 0.0) + D / h;
      b[f] = std::max(-v, 0.0) + D / h;
    } else {
      const double pe = v * h / D;
      b[f] = D / h * bernoulli(pe);
      a[f] = b[f] + v;  // B(-z) = B(z) + z
    }
  }
}

struct StepPlan {
  DriftCoefficients dc;
  std::vector<std::vector<double>> a, b;
  double max_dt;
};

StepPlan plan_step(const GridDensity& d, const CoeffContext& ctx, FluxScheme scheme) {
  const auto [Q, R] = compute_couplings(d, ctx.phi());
  StepPlan plan{drift_coefficients(ctx, std::clamp(Q, -1.0, 1.0), R), {}, {}, 0.0};
  if (!std::isfinite(plan.dc.G) || !std::isfinite(plan.dc.Lambda)) {
    throw NumericError("step_fp: non-finite coefficients at Q = " + std::to_string(Q));
  }
  const std::size_t n = d.grid.n_cells;
  const double h = d.grid.h();
  std::vector<double> v_cell;
  double rate = 0.0;
  plan.a.resize(d.atoms.size());
  plan.b.resize(d.atoms.size());
  for (std::size_t j = 0; j < d.atoms.size(); ++j) {
    auto& a = plan.a[j];
    auto& b = plan.b[j];
    face_coeffs(d.grid, plan.dc, d.atoms[j].xi, scheme, a, b, v_cell);
    // Outflow rate of cell i: a at its right face plus b at its left face.
    for (std::size_t i = 0; i < n; ++i) {
      const double out = (i + 1 < n ? a[i] : 0.0) + (i > 0 ? b[i - 1] : 0.0);
      rate = std::max(rate, out);
    }
  }
  plan.max_dt = rate > 0.0 ? h / rate : std::numeric_limits<double>::infinity();
  return plan;
}

GridDensity apply_step(const GridDensity& d, const StepPlan& plan, double dt) {
  const std::size_t n = d.grid.n_cells;
  const double r = dt / d.grid.h();
  GridDensity out{d.grid, d.atoms, d.t + dt};
  for (std::size_t j = 0; j < d.atoms.size(); ++j) {
    const auto& p = d.atoms[j].density;
    const auto& a = plan.a[j];
    const auto& b = plan.b[j];
    auto& q = out.atoms[j].density;
    for (std::size_t i = 0; i < n; ++i) {
      const double right = i + 1 < n ? a[i] * p[i] - b[i] * p[i + 1] : 0.0;
      const double left = i > 0 ? a[i - 1] * p[i - 1] - b[i - 1] * p[i] : 0.0;
      q[i] = p[i] - r * (right - left);
    }
  }
  return out;
}

}  // namespace

double stable_dt(const GridDensity& d, const CoeffContext& ctx, FluxScheme scheme, double safety) {
  return safety * plan_step(d, ctx, scheme).max_dt;
}

GridDensity step_fp(const GridDensity& d, const CoeffContext& ctx, double dt, FluxScheme scheme) {
  if (!(dt > 0.0)) throw DomainError("step_fp: dt must be > 0");
  const auto plan = plan_step(d, ctx, scheme);
  if (dt > plan.max_dt) throw StepSizeError("step_fp: dt exceeds the positivity bound", plan.max_dt);
  return apply_step(d, plan, dt);
}

PdeSolution solve(const PdeConfig& config) {
  if (!(config.T >= 0.0)) throw ConfigError("pde: T must be >= 0");
  if (!(config.dt_max > 0.0)) throw ConfigError("pde: dt_max must be > 0");
  if (!(config.safety > 0.0 && config.safety <= 1.0)) throw ConfigError("pde: safety must be in (0, 1]");
  if (config.grid.n_cells % 2 != 0) throw ConfigError("pde: n_cells must be even so no cell straddles 0");
  std::vector<double> snaps = config.snapshot_times;
  std::sort(snaps.begin(), snaps.end());
  for (double s : snaps) {
    if (!(s >= 0.0 && s <= config.T)) throw ConfigError("pde: snapshot time " + std::to_string(s) + " outside [0, T]");
  }

  PdeSolution sol;
  GridDensity d = init_density(config.prior, config.q0, config.grid);
  const std::size_t n = d.grid.n_cells;
  const std::size_t edge = std::max<std::size_t>(1, n / 32);
  auto& diag = sol.diagnostics;
  diag.min_density = 0.0;

  auto record = [&](const GridDensity& g) {
    const auto c = compute_couplings(g, config.ctx.phi());
    sol.times.push_back(g.t);
    sol.Q_path.push_back(c.Q);
    sol.R_path.push_back(c.R);
    const double m2 = g.second_moment();
    diag.min_second_moment = std::min(diag.min_second_moment, m2);
    diag.max_second_moment = std::max(diag.max_second_moment, m2);
    for (std::size_t j = 0; j < g.atoms.size(); ++j) {
      diag.max_mass_drift = std::max(diag.max_mass_drift, std::abs(g.mass(j) - 1.0));
      const auto& p = g.atoms[j].density;
      double outer = 0.0;
      for (std::size_t i = 0; i < edge; ++i) outer += p[i] + p[n - 1 - i];
      outer *= g.grid.h();
      diag.max_boundary_mass = std::max(diag.max_boundary_mass, outer);
      if (outer > 1e-4) {
        throw NumericError("pde: domain too small (mass " + std::to_string(outer) + " near the boundary at t = " +
                           std::to_string(g.t) + ")");
      }
    }
  };

  diag.min_second_moment = diag.max_second_moment = d.second_moment();
  record(d);
  std::size_t next_snap = 0;
  auto take_snapshots = [&]() {
    while (next_snap < snaps.size() && std::abs(snaps[next_snap] - d.t) <= 1e-12 * std::max(1.0, config.T)) {
      sol.snapshots.push_back(d);
      sol.snapshots.back().t = snaps[next_snap];
      ++next_snap;
    }
  };
  sol.snapshots.push_back(d);
  if (!snaps.empty() && snaps[0] == 0.0) ++next_snap;
  while (next_snap < snaps.size() && snaps[next_snap] == 0.0) ++next_snap;

  const double t_eps = 1e-12 * std::max(1.0, config.T);
  while (d.t < config.T - t_eps) {
    const auto ctx = config.schedule.is_constant() ? config.ctx.with_tau(config.schedule.tau0())
                                                   : config.ctx.with_tau(config.schedule(d.t));
    const auto plan = plan_step(d, ctx, config.scheme);
    double dt = std::min(config.dt_max, config.safety * plan.max_dt);
    double target = config.T;
    if (next_snap < snaps.size()) target = std::min(target, snaps[next_snap]);
    bool lands = false;
    if (d.t + dt >= target - t_eps) {
      dt = target - d.t;
      lands = true;
    }
    GridDensity nd = apply_step(d, plan, dt);
    if (lands) nd.t = target;
    for (auto& a : nd.atoms) {
      for (double& p : a.density) {
        if (!std::isfinite(p)) throw NumericError("pde: non-finite density at t = " + std::to_string(nd.t));
        if (p < 0.0) {
          diag.min_density = std::min(diag.min_density, p);
          ++diag.clipped;
          p = 0.0;
        }
      }
    }
    d = std::move(nd);
    ++diag.steps;
    record(d);
    take_snapshots();
  }
  return sol;
}

}  // namespace icadyn
