#include "icadyn/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "icadyn/errors.hpp"

namespace icadyn {

// Roots of the physicists' Hermite polynomial H_n by Newton iteration on the
// orthonormal recurrence, then mapped to the standard normal weight.
QuadratureRule QuadratureRule::gauss_hermite(int n_points) {
  if (n_points < 1 || n_points > 200) {
    throw DomainError("gauss_hermite: node count must be in [1, 200]");
  }
  const int n = n_points;
  const long double pim4 = 0.7511255444649424828587030047762276930510L;  // pi^{-1/4}
  std::vector<long double> x(n), w(n);
  const int m = (n + 1) / 2;
  long double z = 0.0L;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(static_cast<long double>(2 * n + 1)) -
          1.85575L * std::pow(static_cast<long double>(2 * n + 1), -0.16667L);
    } else if (i == 1) {
      z -= 1.14L * std::pow(static_cast<long double>(n), 0.426L) / z;
    } else if (i == 2) {
      z = 1.86L * z - 0.86L * x[0];
    } else if (i == 3) {
      z = 1.91L * z - 0.91L * x[1];
    } else {
      z = 2.0L * z - x[i - 2];
    }
    long double pp = 0.0L;
    for (int iter = 0; iter < 100; ++iter) {
      long double p1 = pim4;
      long double p2 = 0.0L;
      for (int j = 0; j < n; ++j) {
        const long double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0L / (j + 1)) * p2 - std::sqrt(static_cast<long double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0L * n) * p2;
      const long double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) <= 1e-19L * std::max(1.0L, std::fabs(z))) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0L / (pp * pp);
    w[n - 1 - i] = w[i];
  }

  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const long double sqrt_pi = std::sqrt(std::numbers::pi_v<long double>);
  long double total = 0.0L;
  for (int k = 0; k < n; ++k) total += w[k] / sqrt_pi;
  for (int k = 0; k < n; ++k) {
    // ascending order
    rule.nodes[k] = static_cast<double>(-x[k] * std::numbers::sqrt2_v<long double>);
    rule.weights[k] = static_cast<double>(w[k] / sqrt_pi / total);
  }
  return rule;
}

}  // namespace icadyn
