#pragma once

// Generative side of the online ICA problem: the hidden feature vector, its
// limiting coordinate law, the non-Gaussian source law and the observation
// sampler y = xi c / sqrt(n) + a, a ~ N(0, I - xi xi^T / n).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "icadyn/rng.hpp"

namespace icadyn {

struct Atom {
  double value;
  double weight;
};

// Finite-atom law of the source c_k: zero mean, unit variance.
class SourceDist {
public:
  // Throws ConfigError if weights/mean/variance violate the invariants.
  explicit SourceDist(std::vector<Atom> atoms);

  static SourceDist rademacher();
  // {-sqrt3, 0, sqrt3} with weights {1/6, 2/3, 1/6}.
  static SourceDist three_point();
  // Gauss-Hermite atoms with `k` nodes; moments agree with N(0,1) up to
  // order 2k-1, so k >= 4 gives m4 = 3 and m6 = 15.
  static SourceDist gaussian_matching(int k);

  const std::vector<Atom>& atoms() const { return atoms_; }
  double m4() const { return m4_; }
  double m6() const { return m6_; }

  double sample(Rng& rng) const;

private:
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
  double m4_ = 0.0;
  double m6_ = 0.0;
};

// (m4, m6) as atom-weighted power sums.
std::pair<double, double> source_moments(const SourceDist& dist);

// Limiting empirical law mu* of the coordinates xi_i.
class PriorMeasure {
public:
  // Throws ConfigError unless weights sum to 1 and sum w xi^2 = 1.
  explicit PriorMeasure(std::vector<Atom> atoms);

  static PriorMeasure point(double value = 1.0);
  // (1 - rho) delta(0) + rho delta(1/sqrt(rho)).
  static PriorMeasure sparse(double rho);

  const std::vector<Atom>& atoms() const { return atoms_; }

  // Index of the atom whose value equals 0, if any.
  std::ptrdiff_t zero_atom() const;

private:
  std::vector<Atom> atoms_;
};

// xi with ||xi||^2 = n. `atom_of[i]` labels which prior atom coordinate i was
// drawn from; histograms and ROC curves group coordinates by this label.
struct FeatureVector {
  std::size_t n = 0;
  std::vector<double> values;
  std::vector<double> atom_values;
  std::vector<std::size_t> atom_of;
};

FeatureVector make_sparse_feature(std::size_t n, double rho, std::uint64_t seed);

enum class FeatureMode { iid, deterministic };

FeatureVector feature_from_prior(std::size_t n, const PriorMeasure& prior,
                                 FeatureMode mode, std::uint64_t seed);

// y = xi c / sqrt(n) + g - (xi^T g / n) xi with g ~ N(0, I).
std::vector<double> sample_observation(const FeatureVector& xi, double c, Rng& rng);

// Step size tau(t): constant, or piecewise-linear through (t, tau) knots and
// held flat outside the table.
class StepSchedule {
public:
  static StepSchedule constant(double tau0);
  static StepSchedule table(std::vector<std::pair<double, double>> knots);

  double operator()(double t) const;
  bool is_constant() const { return knots_.empty(); }
  double tau0() const { return tau0_; }
  const std::vector<std::pair<double, double>>& knots() const { return knots_; }

private:
  double tau0_ = 0.0;
  std::vector<std::pair<double, double>> knots_;
};

}  // namespace icadyn
