#pragma once

// Nonlinear Fokker-Planck equation for the limiting joint law of (xi, x):
//
//   dP/dt = -d/dx [ Gamma(x, xi, Q_t, R_t) P ] + Lambda(Q_t)/2 d^2P/dx^2,
//   Q_t = E[xi x],  R_t = E[x phi(x)],
//
// with xi on the atoms of the prior and x on a uniform finite-volume grid.
// Explicit Euler in time; the couplings are taken from the pre-step density.

#include <optional>
#include <vector>

#include "icadyn/coeffs.hpp"
#include "icadyn/grid.hpp"
#include "icadyn/model.hpp"

namespace icadyn {

struct AtomDensity {
  double xi;
  double weight;
  std::vector<double> density;  // per cell, integrates to 1 over the grid
};

struct GridDensity {
  Grid1D grid;
  std::vector<AtomDensity> atoms;
  double t = 0.0;

  double mass(std::size_t atom) const;
  // sum_j w_j int x^2 P(x | xi_j) dx
  double second_moment() const;
  double min_value() const;
};

// Symmetric domain [-L, L] with L = max(half_width, max_j |sqrt(q0) xi_j| +
// 6 sqrt(1 - q0)). n_cells is rounded up to even so x = 0 is a cell face.
Grid1D auto_grid(const PriorMeasure& prior, double q0, std::size_t n_cells, double half_width = 8.0);

// Conditional x | xi_j ~ N(sqrt(q0) xi_j, 1 - q0), sampled at cell centres and
// renormalised. Throws DomainError for q0 = 1 and ConfigError if more than
// 1e-6 of any conditional lies outside the grid.
GridDensity init_density(const PriorMeasure& prior, double q0, const Grid1D& grid);

struct Couplings {
  double Q;
  double R;
};

// Midpoint-rule integrals of xi x and x phi(x).
Couplings compute_couplings(const GridDensity& d, const Regularizer& phi);

enum class FluxScheme {
  // Scharfetter-Gummel exponential fitting: central for small cell Peclet
  // numbers, upwind for large ones. Positivity-preserving under the bound.
  exponential_fitting,
  // First-order donor-cell drift plus central diffusion.
  upwind,
};

// Largest dt for which the explicit update keeps every coefficient of the
// old density nonnegative (hence positivity), times `safety`.
double stable_dt(const GridDensity& d, const CoeffContext& ctx, FluxScheme scheme, double safety = 0.9);

// One conservative explicit step with no-flux boundaries. Throws
// StepSizeError when dt exceeds stable_dt(d, ctx, scheme, 1.0).
GridDensity step_fp(const GridDensity& d, const CoeffContext& ctx, double dt,
                    FluxScheme scheme = FluxScheme::exponential_fitting);

struct PdeConfig {
  PriorMeasure prior = PriorMeasure::point(1.0);
  CoeffContext ctx;  // f, phi, source, g_sign; tau from `schedule`
  StepSchedule schedule;
  double q0 = 0.0;
  double T = 0.0;
  Grid1D grid;
  std::vector<double> snapshot_times;
  double dt_max = 0.05;
  double safety = 0.9;
  FluxScheme scheme = FluxScheme::exponential_fitting;
};

struct PdeDiagnostics {
  double max_mass_drift = 0.0;  // max_j |mass_j - 1| over the run
  double min_density = 0.0;     // most negative value before clipping
  std::size_t clipped = 0;      // cells clipped to zero
  double min_second_moment = 1.0;
  double max_second_moment = 1.0;
  double max_boundary_mass = 0.0;
  std::size_t steps = 0;
};

struct PdeSolution {
  std::vector<GridDensity> snapshots;  // at t = 0 and each snapshot time
  std::vector<double> times;           // every step
  std::vector<double> Q_path;
  std::vector<double> R_path;
  PdeDiagnostics diagnostics;
};

// Throws NumericError ("domain too small") when the mass in the outer 1/32 of
// the grid exceeds 1e-4.
PdeSolution solve(const PdeConfig& config);

}  // namespace icadyn
