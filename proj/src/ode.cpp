#include "icadyn/ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "icadyn/errors.hpp"

namespace icadyn {

double rhs_general(const CoeffContext& ctx, double Q) {
  if (ctx.phi().kind() != Regularizer::Kind::none) {
    throw ConfigError("rhs_general: only phi = none closes on Q; use the PDE solver");
  }
  return (Q * Q - 1.0) * g_coeff(ctx, Q) - 0.5 * Q * lambda_coeff(ctx, Q);
}

double rhs_example1(double tau, double q, double m4, double m6, int orientation) {
  const double q2 = q * q;
  return -2.0 * orientation * tau * q2 * (1.0 - q) * (m4 - 3.0) -
         tau * tau * q * (15.0 * q2 * (1.0 - q) * (m4 - 3.0) + q2 * q * (m6 - 15.0) + 15.0);
}

int cubic_orientation(const Nonlinearity& f, int g_sign) {
  switch (f.kind()) {
    case Nonlinearity::Kind::neg_cube: return g_sign;
    case Nonlinearity::Kind::cube: return -g_sign;
    default: throw ConfigError("closed-form cubic ODE needs f = cube or neg_cube, got " + f.name());
  }
}

QRhs example1_rhs(const StepSchedule& sched, double m4, double m6, int orientation) {
  return [sched, m4, m6, orientation](double t, double q) { return rhs_example1(sched(t), q, m4, m6, orientation); };
}

QRhs general_rhs(const CoeffContext& ctx, const StepSchedule& sched) {
  if (ctx.phi().kind() != Regularizer::Kind::none) {
    throw ConfigError("general_rhs: only phi = none closes on Q; use the PDE solver");
  }
  return [ctx, sched](double t, double q) {
    const double Q = std::sqrt(std::clamp(q, 0.0, 1.0));
    const auto c = sched.is_constant() ? ctx : ctx.with_tau(sched(t));
    return 2.0 * Q * rhs_general(c, Q);
  };
}

OdeSolution integrate(const QRhs& rhs, double q0, double t_end, double dt, std::size_t record_every) {
  if (!(q0 >= 0.0 && q0 <= 1.0)) throw DomainError("integrate: q0 must be in [0, 1]");
  if (!(dt > 0.0)) throw DomainError("integrate: dt must be > 0");
  if (!(t_end >= 0.0)) throw DomainError("integrate: t_end must be >= 0");
  record_every = std::max<std::size_t>(1, record_every);

  OdeSolution sol;
  auto record = [&](double t, double q) {
    sol.times.push_back(t);
    sol.q.push_back(q);
    sol.Q.push_back(std::sqrt(q));
  };
  double q = q0;
  record(0.0, q);
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double h = std::min(dt, t_end - t);
    const double k1 = rhs(t, q);
    const double k2 = rhs(t + 0.5 * h, q + 0.5 * h * k1);
    const double k3 = rhs(t + 0.5 * h, q + 0.5 * h * k2);
    const double k4 = rhs(t + h, q + h * k3);
    q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(q)) {
      throw NumericError("integrate: non-finite state at step " + std::to_string(k + 1) +
                         " (t = " + std::to_string(t + h) + ")");
    }
    const double excursion = std::max(-q, q - 1.0);
    if (excursion > 0.0) {
      sol.max_excursion = std::max(sol.max_excursion, excursion);
      q = std::clamp(q, 0.0, 1.0);
    }
    if ((k + 1) % record_every == 0 || k + 1 == steps) record(k + 1 == steps ? t_end : t + h, q);
  }
  return sol;
}

std::vector<FixedPoint> find_fixed_points(double tau, double m4, double m6, int orientation) {
  if (!(tau > 0.0)) throw DomainError("find_fixed_points: tau must be > 0");
  constexpr int kScan = 10000;
  auto g = [&](double q) { return rhs_example1(tau, q, m4, m6, orientation); };
  auto slope_at = [&](double q) {
    const double h = 1e-6;
    return (g(q + h) - g(q - h)) / (2.0 * h);
  };

  std::vector<FixedPoint> roots;
  double q_prev = 1.0 / kScan;
  double g_prev = g(q_prev);
  auto push = [&](double q) {
    const double s = slope_at(q);
    roots.push_back({q, s, s < 0.0});
  };
  if (g_prev == 0.0) push(q_prev);
  for (int j = 2; j <= kScan; ++j) {
    const double q = static_cast<double>(j) / kScan;
    const double gq = g(q);
    if (gq == 0.0) {
      push(q);
    } else if (g_prev != 0.0 && (gq > 0.0) != (g_prev > 0.0)) {
      double lo = q_prev, hi = q, glo = g_prev;
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        const double gm = g(mid);
        if (gm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((gm > 0.0) == (glo > 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      push(0.5 * (lo + hi));
    }
    q_prev = q;
    g_prev = gq;
  }
  return roots;
}

namespace {

// max over q in (0, 1] of dq/dt: scan, then golden-section refinement around
// the best scan point. Positive iff informative fixed points exist.
double max_rhs(double tau, double m4, double m6, int orientation) {
  auto g = [&](double q) { return rhs_example1(tau, q, m4, m6, orientation); };
  constexpr int kScan = 10000;
  int best = 1;
  double best_val = g(1.0 / kScan);
  for (int j = 2; j <= kScan; ++j) {
    const double v = g(static_cast<double>(j) / kScan);
    if (v > best_val) {
      best_val = v;
      best = j;
    }
  }
  double a = std::max(1e-12, static_cast<double>(best - 1) / kScan);
  double b = std::min(1.0, static_cast<double>(best + 1) / kScan);
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double gc = g(c), gd = g(d);
  for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
    if (gc > gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - r * (b - a);
      gc = g(c);
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + r * (b - a);
      gd = g(d);
    }
  }
  return std::max({best_val, gc, gd});
}

bool has_informative_roots(double tau, double m4, double m6, int orientation) {
  return max_rhs(tau, m4, m6, orientation) > 0.0;
}

}  // namespace

TauCritical find_tau_c(double m4, double m6, double tol, double tau_max, int orientation) {
  double lo = 1e-3;
  if (!has_informative_roots(lo, m4, m6, orientation)) {
    throw NumericError("find_tau_c: no informative fixed points even at tau = 1e-3 (m4 = " +
                       std::to_string(m4) + ")");
  }
  double hi = 2.0 * lo;
  while (has_informative_roots(hi, m4, m6, orientation)) {
    lo = hi;
    hi *= 2.0;
    if (hi > tau_max) {
      throw NumericError("find_tau_c: informative roots persist up to tau_max = " + std::to_string(tau_max));
    }
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (has_informative_roots(mid, m4, m6, orientation)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return {0.5 * (lo + hi), lo, hi};
}

BifurcationResult bifurcation(const std::vector<double>& taus, double m4, double m6, int orientation) {
  BifurcationResult result;
  try {
    result.tau_c = find_tau_c(m4, m6, 1e-8, 10.0, orientation).tau_c;
  } catch (const NumericError&) {
    result.tau_c = std::numeric_limits<double>::quiet_NaN();
  }
  for (double tau : taus) {
    BifurcationBranch br{tau, std::nullopt, std::nullopt};
    for (const auto& fp : find_fixed_points(tau, m4, m6, orientation)) {
      if (fp.stable && !br.q_stable) br.q_stable = fp.q;
      if (!fp.stable && !br.q_unstable) br.q_unstable = fp.q;
    }
    result.branches.push_back(br);
  }
  return result;
}

}  // namespace icadyn
