#pragma once

// Order-parameter ODEs. For phi = 0 the limit closes on Q:
//   dQ/dt = (Q^2 - 1) G(Q) - Q Lambda(Q) / 2,
// and for the cubic nonlinearity on q = Q^2:
//   dq/dt = -2 tau q^2 (1-q)(m4-3) - tau^2 q [15 q^2 (1-q)(m4-3) + q^3 (m6-15) + 15].

#include <functional>
#include <optional>
#include <vector>

#include "icadyn/coeffs.hpp"

namespace icadyn {

struct OdeSolution {
  std::vector<double> times;
  std::vector<double> q;
  std::vector<double> Q;  // sqrt(q), nonnegative branch
  // Largest distance by which q left [0, 1] before clipping.
  double max_excursion = 0.0;
};

// Throws ConfigError when the context carries a regularizer.
double rhs_general(const CoeffContext& ctx, double Q);

// `orientation` = +1 is the closed form above, realised by f(x) = -x^3 under
// the update rule; -1 flips the sign of the G term, which is the closed form
// for f(x) = +x^3. The Lambda term does not depend on the orientation.
double rhs_example1(double tau, double q, double m4, double m6, int orientation = +1);

// Orientation of the closed form realised by (f, g_sign); throws ConfigError
// unless f is cube or neg_cube.
int cubic_orientation(const Nonlinearity& f, int g_sign);

using QRhs = std::function<double(double t, double q)>;

// dq/dt for the cubic closed form with a (possibly time-varying) step size.
QRhs example1_rhs(const StepSchedule& sched, double m4, double m6, int orientation = +1);
// dq/dt = 2 Q dQ/dt from rhs_general with Q = sqrt(q).
QRhs general_rhs(const CoeffContext& ctx, const StepSchedule& sched);

// Classical fixed-step RK4. The last step is shortened to land on t_end.
// Records every `record_every`-th step plus the final point. Throws
// NumericError on NaN/inf.
OdeSolution integrate(const QRhs& rhs, double q0, double t_end, double dt, std::size_t record_every = 1);

struct FixedPoint {
  double q;
  double slope;  // d(dq/dt)/dq at the root
  bool stable;
};

// Roots of rhs_example1 on (0, 1]: sign scan on 10^4 points, bisection to
// 1e-10, stability from a central difference.
std::vector<FixedPoint> find_fixed_points(double tau, double m4, double m6, int orientation = +1);

struct TauCritical {
  double tau_c;
  double lo;  // largest tau found with informative roots
  double hi;  // smallest tau found without
};

// Supremum of the step sizes that admit informative fixed points, by
// bisection to a bracket width of `tol`. Throws NumericError if no bracket
// exists in (0, tau_max].
TauCritical find_tau_c(double m4, double m6, double tol = 1e-8, double tau_max = 10.0, int orientation = +1);

struct BifurcationBranch {
  double tau;
  std::optional<double> q_unstable;
  std::optional<double> q_stable;
};

struct BifurcationResult {
  double tau_c = 0.0;
  std::vector<BifurcationBranch> branches;
};

// tau_c (or NaN when the source has no informative branch) and the fixed
// points at each listed tau.
BifurcationResult bifurcation(const std::vector<double>& taus, double m4, double m6, int orientation = +1);

}  // namespace icadyn
