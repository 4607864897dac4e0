#include "icadyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "icadyn/errors.hpp"
#include "icadyn/quadrature.hpp"

namespace icadyn {

namespace {

constexpr double kMomentTol = 1e-12;

double weighted_power(const std::vector<Atom>& atoms, int p) {
  double acc = 0.0;
  for (const auto& a : atoms) acc += a.weight * std::pow(a.value, p);
  return acc;
}

void check_weights(const std::vector<Atom>& atoms, const char* what) {
  if (atoms.empty()) throw ConfigError(std::string(what) + ": no atoms");
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.weight >= 0.0) || !std::isfinite(a.value)) {
      throw ConfigError(std::string(what) + ": negative weight or non-finite atom");
    }
    total += a.weight;
  }
  if (std::abs(total - 1.0) > kMomentTol) {
    throw ConfigError(std::string(what) + ": weights must sum to 1");
  }
}

}  // namespace

SourceDist::SourceDist(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  check_weights(atoms_, "source distribution");
  if (std::abs(weighted_power(atoms_, 1)) > kMomentTol) {
    throw ConfigError("source distribution: mean must be 0");
  }
  if (std::abs(weighted_power(atoms_, 2) - 1.0) > kMomentTol) {
    throw ConfigError("source distribution: variance must be 1");
  }
  m4_ = weighted_power(atoms_, 4);
  m6_ = weighted_power(atoms_, 6);
  cumulative_.reserve(atoms_.size());
  double acc = 0.0;
  for (const auto& a : atoms_) cumulative_.push_back(acc += a.weight);
  cumulative_.back() = 1.0;
}

SourceDist SourceDist::rademacher() { return SourceDist({{-1.0, 0.5}, {1.0, 0.5}}); }

SourceDist SourceDist::three_point() {
  const double r3 = std::sqrt(3.0);
  return SourceDist({{-r3, 1.0 / 6.0}, {0.0, 2.0 / 3.0}, {r3, 1.0 / 6.0}});
}

SourceDist SourceDist::gaussian_matching(int k) {
  const auto rule = QuadratureRule::gauss_hermite(k);
  std::vector<Atom> atoms;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) atoms.push_back({rule.nodes[i], rule.weights[i]});
  return SourceDist(std::move(atoms));
}

double SourceDist::sample(Rng& rng) const {
  if (atoms_.size() == 1) return atoms_[0].value;
  const double u = rng.uniform();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto idx = std::min<std::size_t>(it - cumulative_.begin(), atoms_.size() - 1);
  return atoms_[idx].value;
}

std::pair<double, double> source_moments(const SourceDist& dist) {
  return {dist.m4(), dist.m6()};
}

PriorMeasure::PriorMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  check_weights(atoms_, "prior");
  if (std::abs(weighted_power(atoms_, 2) - 1.0) > kMomentTol) {
    throw ConfigError("prior: second moment must be 1");
  }
}

PriorMeasure PriorMeasure::point(double value) { return PriorMeasure({{value, 1.0}}); }

PriorMeasure PriorMeasure::sparse(double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("sparse prior: rho must be in (0, 1]");
  if (rho == 1.0) return point(1.0);
  return PriorMeasure({{0.0, 1.0 - rho}, {1.0 / std::sqrt(rho), rho}});
}

std::ptrdiff_t PriorMeasure::zero_atom() const {
  for (std::size_t j = 0; j < atoms_.size(); ++j) {
    if (atoms_[j].value == 0.0) return static_cast<std::ptrdiff_t>(j);
  }
  return -1;
}

namespace {

void rescale_to_norm(FeatureVector& xi) {
  double ss = 0.0;
  for (double v : xi.values) ss += v * v;
  if (!(ss > 0.0)) throw DomainError("feature vector is identically zero");
  const double scale = std::sqrt(static_cast<double>(xi.n) / ss);
  if (scale != 1.0) {
    for (double& v : xi.values) v *= scale;
    for (double& v : xi.atom_values) v *= scale;
  }
}

}  // namespace

FeatureVector make_sparse_feature(std::size_t n, double rho, std::uint64_t seed) {
  if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("make_sparse_feature: rho must be in (0, 1]");
  const auto support = static_cast<std::size_t>(std::llround(rho * static_cast<double>(n)));
  if (n == 0 || support < 1) throw DomainError("make_sparse_feature: round(rho n) must be >= 1");

  FeatureVector xi;
  xi.n = n;
  const double level = 1.0 / std::sqrt(rho);
  if (support == n) {
    xi.atom_values = {level};
    xi.atom_of.assign(n, 0);
    xi.values.assign(n, level);
  } else {
    xi.atom_values = {0.0, level};
    xi.atom_of.assign(n, 0);
    xi.values.assign(n, 0.0);
    // Partial Fisher-Yates: the first `support` slots of a random permutation.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = 0; i < support; ++i) {
      const auto span = static_cast<double>(n - i);
      auto j = i + static_cast<std::size_t>(rng.uniform() * span);
      j = std::min(j, n - 1);
      std::swap(idx[i], idx[j]);
      xi.values[idx[i]] = level;
      xi.atom_of[idx[i]] = 1;
    }
  }
  rescale_to_norm(xi);
  return xi;
}

FeatureVector feature_from_prior(std::size_t n, const PriorMeasure& prior, FeatureMode mode,
                                 std::uint64_t seed) {
  if (n == 0) throw DomainError("feature_from_prior: n must be positive");
  const auto& atoms = prior.atoms();
  FeatureVector xi;
  xi.n = n;
  xi.values.resize(n);
  xi.atom_of.resize(n);
  for (const auto& a : atoms) xi.atom_values.push_back(a.value);

  if (mode == FeatureMode::iid) {
    std::vector<double> cum;
    double acc = 0.0;
    for (const auto& a : atoms) cum.push_back(acc += a.weight);
    cum.back() = 1.0;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
      const auto it = std::upper_bound(cum.begin(), cum.end(), rng.uniform());
      xi.atom_of[i] = std::min<std::size_t>(it - cum.begin(), atoms.size() - 1);
    }
  } else {
    // Stride scheduling: coordinate i goes to the atom furthest behind its
    // quota w_j (i + 1). Gives 0, sqrt2, 0, sqrt2, ... for the half/half prior.
    std::vector<double> count(atoms.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_deficit = -1e300;
      for (std::size_t j = 0; j < atoms.size(); ++j) {
        const double deficit = atoms[j].weight * static_cast<double>(i + 1) - count[j];
        if (deficit > best_deficit + 1e-12) {
          best_deficit = deficit;
          best = j;
        }
      }
      count[best] += 1.0;
      xi.atom_of[i] = best;
    }
  }
  for (std::size_t i = 0; i < n; ++i) xi.values[i] = atoms[xi.atom_of[i]].value;
  rescale_to_norm(xi);
  return xi;
}

std::vector<double> sample_observation(const FeatureVector& xi, double c, Rng& rng) {
  const auto n = xi.n;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  std::vector<double> y(n);
  double xi_dot_g = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.normal();
    xi_dot_g += xi.values[i] * y[i];
  }
  const double proj = xi_dot_g / static_cast<double>(n);
  const double signal = c / sqrt_n;
  for (std::size_t i = 0; i < n; ++i) y[i] += (signal - proj) * xi.values[i];
  return y;
}

StepSchedule StepSchedule::constant(double tau0) {
  if (!(tau0 > 0.0) || !std::isfinite(tau0)) throw ConfigError("step size must be positive");
  StepSchedule s;
  s.tau0_ = tau0;
  return s;
}

StepSchedule StepSchedule::table(std::vector<std::pair<double, double>> knots) {
  if (knots.empty()) throw ConfigError("step-size table is empty");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i].second > 0.0)) throw ConfigError("step-size table: tau must be positive");
    if (i > 0 && !(knots[i].first > knots[i - 1].first)) {
      throw ConfigError("step-size table: times must be strictly increasing");
    }
  }
  StepSchedule s;
  s.tau0_ = knots.front().second;
  s.knots_ = std::move(knots);
  return s;
}

double StepSchedule::operator()(double t) const {
  if (knots_.empty()) return tau0_;
  if (t <= knots_.front().first) return knots_.front().second;
  if (t >= knots_.back().first) return knots_.back().second;
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                                   [](double v, const auto& k) { return v < k.first; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double a = (t - lo.first) / (hi.first - lo.first);
  return lo.second + a * (hi.second - lo.second);
}

}  // namespace icadyn
