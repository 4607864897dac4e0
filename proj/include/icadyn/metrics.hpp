#pragma once

// Functionals of the empirical measure (simulation) and of the limiting
// density (PDE): separable metrics, support-recovery ROC, density distances.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icadyn/coeffs.hpp"
#include "icadyn/grid.hpp"
#include "icadyn/pde.hpp"
#include "icadyn/simulate.hpp"

namespace icadyn {

// h(xi, x) in E[h(xi, x)]:
//   correlation  xi x
//   l2_error     (x - xi)^2
//   abs          |x|
//   x_phi        x phi(x)
enum class Functional { correlation, l2_error, abs, x_phi };

// Throws ConfigError on unknown names.
Functional parse_functional(std::string_view name);
std::string functional_name(Functional h);

// (1/n) sum_i h(xi_i, x_i).
double separable_metric(const SimState& state, Functional h, const Regularizer& phi = {});
// sum_j w_j int h(xi_j, x) P(x | xi_j) dx, midpoint rule.
double separable_metric(const GridDensity& d, Functional h, const Regularizer& phi = {});

struct RocCurve {
  std::vector<double> thresholds;
  std::vector<double> tpr;
  std::vector<double> fpr;
};

// Declares coordinate i in the support when |x_i| > theta. Throws DomainError
// when xi has no zero or no nonzero coordinates, or a threshold is negative.
RocCurve roc_from_simulation(const SimState& state, std::span<const double> thresholds);
RocCurve roc_from_simulation(std::span<const double> x, std::span<const double> xi,
                             std::span<const double> thresholds);

// Tail masses of |x| > theta with the density piecewise constant per cell.
// TPR weights the nonzero atoms by their prior weight. Throws DomainError
// when the prior lacks a zero atom or a nonzero atom.
RocCurve roc_from_pde(const GridDensity& d, std::span<const double> thresholds);

// 0 followed by `count` log-spaced values on [1e-3, x_max].
std::vector<double> default_thresholds(double x_max, std::size_t count = 200);

// Trapezoid area under (fpr, tpr), with the (0,0) and (1,1) corners added.
double auc(const RocCurve& roc);

struct DensityDistance {
  double ks = 0.0;
  double w1 = 0.0;
};

// CDFs compared at the cell faces of the shared grid. Throws DomainError on
// grid mismatch or empty inputs.
DensityDistance density_distance(const Histogram& a, const GridDensity& b, std::size_t atom);
DensityDistance density_distance(const Histogram& a, const Histogram& b);
DensityDistance density_distance(const GridDensity& a, std::size_t atom_a, const GridDensity& b, std::size_t atom_b);

}  // namespace icadyn
