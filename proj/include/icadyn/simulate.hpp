#pragma once

// Finite-n online ICA (gradient step + projection back to the sphere of
// radius sqrt(n)), the decoupled scalar particle process driven by given
// (Q_t, R_t) paths, and a Monte-Carlo estimator of the one-step conditional
// drift/diffusion used to check the limit coefficients.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "icadyn/coeffs.hpp"
#include "icadyn/grid.hpp"
#include "icadyn/model.hpp"
#include "icadyn/rng.hpp"

namespace icadyn {

struct SimState {
  std::uint64_t k = 0;
  std::vector<double> x;
  std::shared_ptr<const FeatureVector> xi;
  double Qn = 0.0;  // xi^T x / n
  double Rn = 0.0;  // x^T phi(x) / n

  std::size_t n() const { return x.size(); }
};

// x0 = sqrt(q0) xi + sqrt(1 - q0) v with v the projection of a standard
// Gaussian onto xi-perp, rescaled to norm sqrt(n). ||x0||^2 = n and
// Q0 = sqrt(q0) hold to rounding.
SimState init_state(std::shared_ptr<const FeatureVector> xi, double q0, const Regularizer& phi, Rng& rng);

// One update with an explicit draw (c, g): y = xi c/sqrt(n) + g - (xi^T g/n) xi.
// Throws DegenerateStateError when ||x~|| = 0.
void advance_with_draw(SimState& state, const Nonlinearity& f, const Regularizer& phi, double tau,
                       double c, std::span<const double> g);

// One update drawing c from the context's source and g from rng. `scratch`
// must hold n doubles.
void advance(SimState& state, const CoeffContext& ctx, double tau, Rng& rng, std::span<double> scratch);

SimState step(SimState state, const CoeffContext& ctx, const StepSchedule& sched, Rng& rng);

struct Snapshot {
  double t = 0.0;
  std::vector<Histogram> per_atom;  // indexed like FeatureVector::atom_values
  std::vector<double> x;            // full state, when requested
};

struct Trajectory {
  std::vector<double> times;
  std::vector<double> Q;
  std::vector<double> R;
  std::vector<Snapshot> snapshots;
};

struct TrialConfig {
  std::shared_ptr<const FeatureVector> xi;
  CoeffContext ctx;  // f, phi and source; tau comes from `schedule`
  StepSchedule schedule;
  double q0 = 0.0;
  double T = 0.0;
  double record_dt = 0.1;
  std::vector<double> snapshot_times;
  std::optional<Grid1D> grid;  // required when snapshots are requested
  bool keep_states = false;
  std::uint64_t seed = 0;
};

// Runs floor(T n) steps; records (Q, R) at t = k/n for k multiple of
// round(record_dt n) and at the final step. Deterministic given the seed.
Trajectory run_trial(const TrialConfig& config);

// Time series of (Q_t, R_t), linearly interpolated.
class CouplingPath {
public:
  CouplingPath(std::vector<double> times, std::vector<double> Q, std::vector<double> R);

  // Throws DomainError outside [times.front(), times.back()].
  std::pair<double, double> at(double t) const;
  double t_end() const { return times_.back(); }

private:
  std::vector<double> times_, Q_, R_;
};

struct DecoupledConfig {
  PriorMeasure prior = PriorMeasure::point(1.0);
  std::size_t particles = 10000;
  CoeffContext ctx;
  StepSchedule schedule;
  double q0 = 0.0;
  double T = 0.0;
  // Euler step is 1 / steps_per_unit_time; the literal particle recursion uses
  // steps_per_unit_time = particles.
  double steps_per_unit_time = 0.0;
  double record_dt = 0.1;
  std::vector<double> snapshot_times;
  std::optional<Grid1D> grid;
  bool keep_states = false;
  std::uint64_t seed = 0;
};

// z <- z + dt Gamma(z, xi, Q_t, R_t) + sqrt(Lambda(Q_t) dt) w, independently
// per particle, with (Q_t, R_t) read from `path`. Recorded Q, R are the
// particle averages of xi z and z phi(z).
Trajectory run_decoupled(const DecoupledConfig& config, const CouplingPath& path);

struct MomentEstimate {
  std::vector<std::size_t> coords;
  std::vector<double> mean;     // E[x_{k+1,i} - x_{k,i}]
  std::vector<double> var;      // Var[x_{k+1,i} - x_{k,i}]
  std::vector<double> se_mean;  // standard error of `mean`
  std::vector<double> se_var;   // standard error of `var`
  std::size_t samples = 0;
};

// Resamples (c, a) n_samples times with (x, xi) fixed and estimates the
// conditional moments of the full (normalised) increment on `coords`.
MomentEstimate moment_oracle(const SimState& state, const CoeffContext& ctx, std::size_t n_samples,
                             std::span<const std::size_t> coords, std::uint64_t seed,
                             unsigned threads = 1);

struct GSignCalibration {
  int g_sign = 1;
  bool conclusive = false;
  double chi2_plus = 0.0;   // sum of squared z-scores against g_sign = +1
  double chi2_minus = 0.0;  // ... against g_sign = -1
  double probe_Q = 0.0;
  std::size_t n = 0;
  std::size_t samples = 0;
  std::size_t coords = 0;
};

// Fixes the sign of G by comparing Monte-Carlo drifts with Gamma/n under both
// signs at a probe state with Q = sqrt(probe_q).
GSignCalibration calibrate_g_sign(const CoeffContext& ctx, std::shared_ptr<const FeatureVector> xi,
                                  double probe_q, std::size_t n_samples, std::uint64_t seed,
                                  unsigned threads = 1);

}  // namespace icadyn
