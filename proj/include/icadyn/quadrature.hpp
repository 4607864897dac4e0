#pragma once

#include <vector>

namespace icadyn {

// Gauss-Hermite rule for E[h(e)], e ~ N(0, 1): sum_k weights[k] h(nodes[k]).
// An n-point rule is exact for polynomials of degree <= 2n - 1.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  static QuadratureRule gauss_hermite(int n_points);

  template <class F>
  double expect(F&& h) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) acc += weights[k] * h(nodes[k]);
    return acc;
  }
};

}  // namespace icadyn
