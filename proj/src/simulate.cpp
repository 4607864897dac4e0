#include "icadyn/simulate.hpp"

#include <algorithm>
#include <cmath>

#include "icadyn/errors.hpp"
#include "icadyn/parallel.hpp"

namespace icadyn {

namespace {

void refresh_order_parameters(SimState& s, const Regularizer& phi) {
  const auto& xi = s.xi->values;
  double q = 0.0, r = 0.0;
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    q += xi[i] * s.x[i];
    r += s.x[i] * phi.phi(s.x[i]);
  }
  const auto n = static_cast<double>(s.x.size());
  s.Qn = q / n;
  s.Rn = r / n;
}

std::uint64_t steps_for(double t, std::size_t n) {
  return static_cast<std::uint64_t>(std::floor(t * static_cast<double>(n) + 1e-9));
}

std::vector<Histogram> bin_by_atom(const FeatureVector& xi, std::span<const double> x, const Grid1D& grid) {
  std::vector<Histogram> h(xi.atom_values.size(), Histogram(grid));
  for (std::size_t i = 0; i < x.size(); ++i) h[xi.atom_of[i]].add(x[i]);
  return h;
}

}  // namespace

SimState init_state(std::shared_ptr<const FeatureVector> xi, double q0, const Regularizer& phi, Rng& rng) {
  if (!xi || xi->n == 0) throw DomainError("init_state: empty feature vector");
  if (!(q0 >= 0.0 && q0 <= 1.0)) throw DomainError("init_state: q0 must be in [0, 1]");
  const auto n = xi->n;
  const auto nd = static_cast<double>(n);
  SimState s;
  s.xi = xi;
  s.x.resize(n);

  std::vector<double> v(n);
  double xg = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = rng.normal();
    xg += xi->values[i] * v[i];
  }
  double vv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v[i] -= xg / nd * xi->values[i];
    vv += v[i] * v[i];
  }
  const double a = std::sqrt(q0);
  const double b = (vv > 0.0) ? std::sqrt((1.0 - q0) * nd / vv) : 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s.x[i] = a * xi->values[i] + b * v[i];
    ss += s.x[i] * s.x[i];
  }
  const double scale = std::sqrt(nd / ss);
  for (double& xv : s.x) xv *= scale;
  refresh_order_parameters(s, phi);
  return s;
}

void advance_with_draw(SimState& state, const Nonlinearity& f, const Regularizer& phi, double tau,
                       double c, std::span<const double> g) {
  const auto n = state.x.size();
  const auto nd = static_cast<double>(n);
  const double sqrt_n = std::sqrt(nd);
  const auto& xi = state.xi->values;
  auto& x = state.x;

  double xi_g = 0.0, x_g = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xi_g += xi[i] * g[i];
    x_g += x[i] * g[i];
  }
  const double xi_x = state.Qn * nd;
  // u = y^T x / sqrt(n)
  const double u = (c * xi_x / sqrt_n + x_g - xi_g * xi_x / nd) / sqrt_n;
  const double alpha = tau * f.value(u) / sqrt_n;
  const double xi_coef = c / sqrt_n - xi_g / nd;
  const double shrink = tau / nd;

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = g[i] + xi_coef * xi[i];
    const double xt = x[i] + alpha * y - shrink * phi.phi(x[i]);
    x[i] = xt;
    ss += xt * xt;
  }
  if (!(ss > 0.0) || !std::isfinite(ss)) {
    throw DegenerateStateError("online step: ||x~|| = 0 or non-finite at k = " + std::to_string(state.k));
  }
  const double scale = sqrt_n / std::sqrt(ss);
  double q = 0.0, r = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] *= scale;
    q += xi[i] * x[i];
    r += x[i] * phi.phi(x[i]);
  }
  state.Qn = q / nd;
  state.Rn = r / nd;
  ++state.k;
}

void advance(SimState& state, const CoeffContext& ctx, double tau, Rng& rng, std::span<double> scratch) {
  const double c = ctx.source().sample(rng);
  for (auto& v : scratch) v = rng.normal();
  advance_with_draw(state, ctx.f(), ctx.phi(), tau, c, scratch);
}

SimState step(SimState state, const CoeffContext& ctx, const StepSchedule& sched, Rng& rng) {
  std::vector<double> scratch(state.n());
  const double t = static_cast<double>(state.k) / static_cast<double>(state.n());
  advance(state, ctx, sched(t), rng, scratch);
  return state;
}

Trajectory run_trial(const TrialConfig& config) {
  if (!config.xi) throw ConfigError("run_trial: no feature vector");
  if (!(config.T >= 0.0)) throw ConfigError("run_trial: T must be >= 0");
  if (!(config.record_dt > 0.0)) throw ConfigError("run_trial: record_dt must be > 0");
  if (!config.snapshot_times.empty() && !config.grid) {
    throw ConfigError("run_trial: snapshots need a grid");
  }
  const auto n = config.xi->n;
  const auto nd = static_cast<double>(n);
  const auto total = steps_for(config.T, n);
  const auto stride = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(config.record_dt * nd)));

  std::vector<std::uint64_t> snap_steps;
  for (double t : config.snapshot_times) {
    if (t < 0.0 || t > config.T + 1e-12) throw ConfigError("run_trial: snapshot time outside [0, T]");
    snap_steps.push_back(std::min(steps_for(t, n), total));
  }

  Rng init_rng(derive_seed(config.seed, {0}));
  Rng step_rng(derive_seed(config.seed, {1}));
  SimState state = init_state(config.xi, config.q0, config.ctx.phi(), init_rng);
  std::vector<double> scratch(n);

  Trajectory traj;
  for (std::uint64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / nd;
    if (k % stride == 0 || k == total) {
      traj.times.push_back(t);
      traj.Q.push_back(state.Qn);
      traj.R.push_back(state.Rn);
    }
    for (std::size_t s = 0; s < snap_steps.size(); ++s) {
      if (snap_steps[s] != k) continue;
      Snapshot snap;
      snap.t = config.snapshot_times[s];
      snap.per_atom = bin_by_atom(*config.xi, state.x, *config.grid);
      if (config.keep_states) snap.x = state.x;
      traj.snapshots.push_back(std::move(snap));
    }
    if (k == total) break;
    advance(state, config.ctx, config.schedule(t), step_rng, scratch);
  }
  return traj;
}

CouplingPath::CouplingPath(std::vector<double> times, std::vector<double> Q, std::vector<double> R)
    : times_(std::move(times)), Q_(std::move(Q)), R_(std::move(R)) {
  if (times_.empty() || times_.size() != Q_.size() || times_.size() != R_.size()) {
    throw ConfigError("coupling path: times, Q and R must be non-empty and of equal length");
  }
  for (std::size_t i = 1; i < times_.size(); ++i) {
    if (!(times_[i] > times_[i - 1])) throw ConfigError("coupling path: times must increase");
  }
}

std::pair<double, double> CouplingPath::at(double t) const {
  constexpr double slack = 1e-9;
  if (t < times_.front() - slack || t > times_.back() + slack) {
    throw DomainError("coupling path: t = " + std::to_string(t) + " outside the recorded range");
  }
  if (t <= times_.front()) return {Q_.front(), R_.front()};
  if (t >= times_.back()) return {Q_.back(), R_.back()};
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const auto j = static_cast<std::size_t>(it - times_.begin());
  const double a = (t - times_[j - 1]) / (times_[j] - times_[j - 1]);
  return {Q_[j - 1] + a * (Q_[j] - Q_[j - 1]), R_[j - 1] + a * (R_[j] - R_[j - 1])};
}

Trajectory run_decoupled(const DecoupledConfig& config, const CouplingPath& path) {
  if (config.particles == 0) throw ConfigError("run_decoupled: particles must be positive");
  if (!(config.q0 >= 0.0 && config.q0 <= 1.0)) throw DomainError("run_decoupled: q0 must be in [0, 1]");
  if (!config.snapshot_times.empty() && !config.grid) throw ConfigError("run_decoupled: snapshots need a grid");
  const double spu = config.steps_per_unit_time > 0.0 ? config.steps_per_unit_time
                                                      : static_cast<double>(config.particles);
  const double dt = 1.0 / spu;
  const auto total = static_cast<std::uint64_t>(std::floor(config.T * spu + 1e-9));
  const auto stride = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(config.record_dt * spu)));
  if (static_cast<double>(total) * dt > path.t_end() + 1e-9) {
    throw DomainError("run_decoupled: coupling path ends before T");
  }

  // Particle labels from the prior; values are the exact atoms (no rescale).
  const auto labels = feature_from_prior(config.particles, config.prior, FeatureMode::deterministic, 0);
  FeatureVector xi = labels;
  for (std::size_t i = 0; i < xi.n; ++i) xi.values[i] = config.prior.atoms()[xi.atom_of[i]].value;
  for (std::size_t j = 0; j < xi.atom_values.size(); ++j) xi.atom_values[j] = config.prior.atoms()[j].value;

  std::vector<std::uint64_t> snap_steps;
  for (double t : config.snapshot_times) {
    if (t < 0.0 || t > config.T + 1e-12) throw ConfigError("run_decoupled: snapshot time outside [0, T]");
    snap_steps.push_back(std::min(static_cast<std::uint64_t>(std::floor(t * spu + 1e-9)), total));
  }

  Rng rng(derive_seed(config.seed, {2}));
  const auto np = config.particles;
  std::vector<double> z(np);
  const double a = std::sqrt(config.q0), b = std::sqrt(1.0 - config.q0);
  for (std::size_t i = 0; i < np; ++i) z[i] = a * xi.values[i] + b * rng.normal();

  const auto& phi = config.ctx.phi();
  Trajectory traj;
  for (std::uint64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k % stride == 0 || k == total) {
      double q = 0.0, r = 0.0;
      for (std::size_t i = 0; i < np; ++i) {
        q += xi.values[i] * z[i];
        r += z[i] * phi.phi(z[i]);
      }
      traj.times.push_back(t);
      traj.Q.push_back(q / static_cast<double>(np));
      traj.R.push_back(r / static_cast<double>(np));
    }
    for (std::size_t s = 0; s < snap_steps.size(); ++s) {
      if (snap_steps[s] != k) continue;
      Snapshot snap;
      snap.t = config.snapshot_times[s];
      snap.per_atom = bin_by_atom(xi, z, *config.grid);
      if (config.keep_states) snap.x = z;
      traj.snapshots.push_back(std::move(snap));
    }
    if (k == total) break;

    const auto [Q, R] = path.at(t);
    const auto dc = drift_coefficients(config.ctx.with_tau(config.schedule(t)), Q, R);
    const double noise = std::sqrt(dc.Lambda * dt);
    for (std::size_t i = 0; i < np; ++i) {
      z[i] += dt * dc.gamma(z[i], xi.values[i]) + noise * rng.normal();
    }
  }
  return traj;
}

namespace {

struct RawMoments {
  std::vector<double> s1, s2, s3, s4;
  explicit RawMoments(std::size_t m) : s1(m, 0.0), s2(m, 0.0), s3(m, 0.0), s4(m, 0.0) {}
};

}  // namespace

MomentEstimate moment_oracle(const SimState& state, const CoeffContext& ctx, std::size_t n_samples,
                             std::span<const std::size_t> coords, std::uint64_t seed, unsigned threads) {
  if (n_samples == 0) throw ConfigError("moment_oracle: n_samples must be positive");
  const auto n = state.x.size();
  const auto nd = static_cast<double>(n);
  const double sqrt_n = std::sqrt(nd);
  const double tau = ctx.tau();
  const auto& f = ctx.f();
  const auto& phi = ctx.phi();
  const auto& xi = state.xi->values;
  const auto& x = state.x;
  for (auto i : coords) {
    if (i >= n) throw DomainError("moment_oracle: coordinate out of range");
  }

  std::vector<double> phix(n);
  double xx = 0.0, pp = 0.0, xp = 0.0, xip = 0.0, xix = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    phix[i] = phi.phi(x[i]);
    xx += x[i] * x[i];
    pp += phix[i] * phix[i];
    xp += x[i] * phix[i];
    xip += xi[i] * phix[i];
    xix += xi[i] * x[i];
  }
  const double shrink = tau / nd;

  constexpr std::size_t kChunk = 2048;
  const std::size_t chunks = (n_samples + kChunk - 1) / kChunk;
  const auto m = coords.size();
  std::vector<RawMoments> partial(chunks, RawMoments(m));

  parallel_for(chunks, threads, [&](std::size_t chunk) {
    Rng rng(derive_seed(seed, {chunk}));
    auto& acc = partial[chunk];
    std::vector<double> g(n);
    const std::size_t begin = chunk * kChunk;
    const std::size_t end = std::min(n_samples, begin + kChunk);
    for (std::size_t s = begin; s < end; ++s) {
      const double c = ctx.source().sample(rng);
      double xi_g = 0.0, x_g = 0.0, p_g = 0.0, g_g = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double gi = rng.normal();
        g[i] = gi;
        xi_g += xi[i] * gi;
        x_g += x[i] * gi;
        p_g += phix[i] * gi;
        g_g += gi * gi;
      }
      const double x_y = c * xix / sqrt_n + x_g - xi_g * xix / nd;
      const double y_y = c * c + g_g - xi_g * xi_g / nd;
      const double p_y = c * xip / sqrt_n + p_g - xi_g * xip / nd;
      const double u = x_y / sqrt_n;
      const double alpha = tau * f.value(u) / sqrt_n;
      const double norm2 = xx + alpha * alpha * y_y + shrink * shrink * pp + 2.0 * alpha * x_y -
                           2.0 * shrink * xp - 2.0 * alpha * shrink * p_y;
      const double scale = sqrt_n / std::sqrt(norm2);
      const double xi_coef = c / sqrt_n - xi_g / nd;
      for (std::size_t j = 0; j < m; ++j) {
        const auto i = coords[j];
        const double y = g[i] + xi_coef * xi[i];
        const double d = (x[i] + alpha * y - shrink * phix[i]) * scale - x[i];
        const double d2 = d * d;
        acc.s1[j] += d;
        acc.s2[j] += d2;
        acc.s3[j] += d2 * d;
        acc.s4[j] += d2 * d2;
      }
    }
  });

  RawMoments total(m);
  for (const auto& p : partial) {
    for (std::size_t j = 0; j < m; ++j) {
      total.s1[j] += p.s1[j];
      total.s2[j] += p.s2[j];
      total.s3[j] += p.s3[j];
      total.s4[j] += p.s4[j];
    }
  }

  MomentEstimate est;
  est.coords.assign(coords.begin(), coords.end());
  est.samples = n_samples;
  const auto N = static_cast<double>(n_samples);
  est.mean.resize(m);
  est.var.resize(m);
  est.se_mean.resize(m);
  est.se_var.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double mu = total.s1[j] / N;
    const double e2 = total.s2[j] / N, e3 = total.s3[j] / N, e4 = total.s4[j] / N;
    const double var = std::max(0.0, e2 - mu * mu);
    const double c4 = e4 - 4.0 * mu * e3 + 6.0 * mu * mu * e2 - 3.0 * mu * mu * mu * mu;
    est.mean[j] = mu;
    est.var[j] = var;
    est.se_mean[j] = std::sqrt(var / N);
    est.se_var[j] = std::sqrt(std::max(0.0, c4 - var * var) / N);
  }
  return est;
}

GSignCalibration calibrate_g_sign(const CoeffContext& ctx, std::shared_ptr<const FeatureVector> xi,
                                  double probe_q, std::size_t n_samples, std::uint64_t seed,
                                  unsigned threads) {
  Rng rng(derive_seed(seed, {0}));
  const auto state = init_state(xi, probe_q, ctx.phi(), rng);
  std::vector<std::size_t> coords(state.n());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  const auto est = moment_oracle(state, ctx, n_samples, coords, derive_seed(seed, {1}), threads);

  const auto plus = drift_coefficients(ctx.with_g_sign(+1), state.Qn, state.Rn);
  const auto minus = drift_coefficients(ctx.with_g_sign(-1), state.Qn, state.Rn);
  const double nd = static_cast<double>(state.n());
  GSignCalibration cal;
  for (std::size_t j = 0; j < coords.size(); ++j) {
    const auto i = coords[j];
    const double se = est.se_mean[j];
    if (!(se > 0.0)) continue;
    const double zp = (est.mean[j] - plus.gamma(state.x[i], xi->values[i]) / nd) / se;
    const double zm = (est.mean[j] - minus.gamma(state.x[i], xi->values[i]) / nd) / se;
    cal.chi2_plus += zp * zp;
    cal.chi2_minus += zm * zm;
  }
  cal.g_sign = cal.chi2_plus <= cal.chi2_minus ? +1 : -1;
  cal.conclusive = std::abs(cal.chi2_plus - cal.chi2_minus) >= 16.0;
  cal.probe_Q = state.Qn;
  cal.n = state.n();
  cal.samples = n_samples;
  cal.coords = coords.size();
  return cal;
}

}  // namespace icadyn
