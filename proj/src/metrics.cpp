#include "icadyn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "icadyn/errors.hpp"

namespace icadyn {

Functional parse_functional(std::string_view name) {
  if (name == "correlation") return Functional::correlation;
  if (name == "l2_error") return Functional::l2_error;
  if (name == "abs") return Functional::abs;
  if (name == "x_phi") return Functional::x_phi;
  throw ConfigError("unknown functional '" + std::string(name) + "' (expected correlation, l2_error, abs, x_phi)");
}

std::string functional_name(Functional h) {
  switch (h) {
    case Functional::correlation: return "correlation";
    case Functional::l2_error: return "l2_error";
    case Functional::abs: return "abs";
    case Functional::x_phi: return "x_phi";
  }
  return "?";
}

namespace {

double eval(Functional h, double xi, double x, const Regularizer& phi) {
  switch (h) {
    case Functional::correlation: return xi * x;
    case Functional::l2_error: return (x - xi) * (x - xi);
    case Functional::abs: return std::abs(x);
    case Functional::x_phi: return x * phi.phi(x);
  }
  return 0.0;
}

// Probability mass of |x| > theta for a piecewise-constant density.
double tail_mass(const Grid1D& g, const std::vector<double>& p, double theta) {
  const double h = g.h();
  double m = 0.0;
  for (std::size_t i = 0; i < g.n_cells; ++i) {
    const double lo = g.face(i), hi = lo + h;
    // length of [lo, hi] outside [-theta, theta]
    double len = 0.0;
    if (hi > theta) len += hi - std::max(lo, theta);
    if (lo < -theta) len += std::min(hi, -theta) - lo;
    m += p[i] * std::max(0.0, len);
  }
  return m;
}

void check_thresholds(std::span<const double> thresholds) {
  for (double t : thresholds) {
    if (!(t >= 0.0)) throw DomainError("roc: thresholds must be >= 0");
  }
}

std::vector<double> cdf_of(const Histogram& a) {
  if (!(a.total > 0.0)) throw DomainError("density_distance: empty histogram");
  std::vector<double> F(a.grid.n_cells + 1);
  double run = a.underflow;
  F[0] = run / a.total;
  for (std::size_t i = 0; i < a.grid.n_cells; ++i) {
    run += a.counts[i];
    F[i + 1] = run / a.total;
  }
  return F;
}

std::vector<double> cdf_of(const GridDensity& d, std::size_t atom) {
  if (atom >= d.atoms.size()) throw DomainError("density_distance: atom index out of range");
  const auto& p = d.atoms[atom].density;
  double mass = 0.0;
  for (double v : p) mass += v;
  if (!(mass > 0.0)) throw DomainError("density_distance: zero-mass density");
  std::vector<double> F(d.grid.n_cells + 1, 0.0);
  double run = 0.0;
  for (std::size_t i = 0; i < d.grid.n_cells; ++i) {
    run += p[i];
    F[i + 1] = run / mass;
  }
  return F;
}

DensityDistance compare(const Grid1D& g, const std::vector<double>& Fa, const std::vector<double>& Fb) {
  DensityDistance out;
  for (std::size_t f = 0; f < Fa.size(); ++f) {
    const double diff = std::abs(Fa[f] - Fb[f]);
    out.ks = std::max(out.ks, diff);
    if (f > 0 && f + 1 < Fa.size()) out.w1 += diff;
  }
  out.w1 *= g.h();
  return out;
}

void require_same_grid(const Grid1D& a, const Grid1D& b) {
  if (!(a == b)) throw DomainError("density_distance: inputs are on different grids");
}

}  // namespace

double separable_metric(const SimState& state, Functional h, const Regularizer& phi) {
  if (!state.xi || state.xi->values.size() != state.x.size()) {
    throw DomainError("separable_metric: state has no matching feature vector");
  }
  const auto& xi = state.xi->values;
  double s = 0.0;
  for (std::size_t i = 0; i < state.x.size(); ++i) s += eval(h, xi[i], state.x[i], phi);
  return s / static_cast<double>(state.x.size());
}

double separable_metric(const GridDensity& d, Functional h, const Regularizer& phi) {
  const double dx = d.grid.h();
  double total = 0.0;
  for (const auto& a : d.atoms) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.grid.n_cells; ++i) s += eval(h, a.xi, d.grid.center(i), phi) * a.density[i];
    total += a.weight * s * dx;
  }
  return total;
}

RocCurve roc_from_simulation(std::span<const double> x, std::span<const double> xi,
                             std::span<const double> thresholds) {
  if (x.size() != xi.size()) throw DomainError("roc: x and xi sizes differ");
  check_thresholds(thresholds);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < x.size(); ++i) (xi[i] != 0.0 ? pos : neg).push_back(std::abs(x[i]));
  if (pos.empty() || neg.empty()) throw DomainError("roc: feature vector needs both zero and nonzero entries");
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto above = [](const std::vector<double>& v, double t) {
    return static_cast<double>(v.end() - std::upper_bound(v.begin(), v.end(), t)) / static_cast<double>(v.size());
  };
  RocCurve roc;
  for (double t : thresholds) {
    roc.thresholds.push_back(t);
    // theta = 0 selects every coordinate, including exact zeros.
    roc.tpr.push_back(t == 0.0 ? 1.0 : above(pos, t));
    roc.fpr.push_back(t == 0.0 ? 1.0 : above(neg, t));
  }
  return roc;
}

RocCurve roc_from_simulation(const SimState& state, std::span<const double> thresholds) {
  if (!state.xi) throw DomainError("roc: state has no feature vector");
  return roc_from_simulation(state.x, state.xi->values, thresholds);
}

RocCurve roc_from_pde(const GridDensity& d, std::span<const double> thresholds) {
  check_thresholds(thresholds);
  const double h = d.grid.h();
  std::vector<std::size_t> pos;
  std::ptrdiff_t zero = -1;
  double pos_weight = 0.0;
  for (std::size_t j = 0; j < d.atoms.size(); ++j) {
    if (d.atoms[j].xi == 0.0) {
      zero = static_cast<std::ptrdiff_t>(j);
    } else {
      pos.push_back(j);
      pos_weight += d.atoms[j].weight;
    }
  }
  if (zero < 0 || pos.empty()) throw DomainError("roc: prior needs a zero atom and a nonzero atom");
  auto mass = [&](std::size_t j) {
    double s = 0.0;
    for (double v : d.atoms[j].density) s += v;
    return s * h;
  };
  const double zero_mass = mass(static_cast<std::size_t>(zero));
  std::vector<double> pos_mass;
  for (auto j : pos) pos_mass.push_back(mass(j));

  RocCurve roc;
  for (double t : thresholds) {
    double tpr = 0.0;
    for (std::size_t k = 0; k < pos.size(); ++k) {
      tpr += d.atoms[pos[k]].weight * tail_mass(d.grid, d.atoms[pos[k]].density, t) / pos_mass[k];
    }
    roc.thresholds.push_back(t);
    roc.tpr.push_back(std::clamp(tpr / pos_weight, 0.0, 1.0));
    roc.fpr.push_back(std::clamp(
        tail_mass(d.grid, d.atoms[static_cast<std::size_t>(zero)].density, t) / zero_mass, 0.0, 1.0));
  }
  return roc;
}

std::vector<double> default_thresholds(double x_max, std::size_t count) {
  if (!(x_max > 1e-3)) throw DomainError("default_thresholds: x_max must exceed 1e-3");
  std::vector<double> t{0.0};
  if (count == 0) return t;
  if (count == 1) {
    t.push_back(1e-3);
    return t;
  }
  const double a = std::log(1e-3), b = std::log(x_max);
  for (std::size_t k = 0; k < count; ++k) {
    t.push_back(std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(count - 1)));
  }
  return t;
}

double auc(const RocCurve& roc) {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {1.0, 1.0}};
  for (std::size_t k = 0; k < roc.fpr.size(); ++k) pts.emplace_back(roc.fpr[k], roc.tpr[k]);
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    area += (pts[k].first - pts[k - 1].first) * 0.5 * (pts[k].second + pts[k - 1].second);
  }
  return area;
}

DensityDistance density_distance(const Histogram& a, const GridDensity& b, std::size_t atom) {
  require_same_grid(a.grid, b.grid);
  return compare(a.grid, cdf_of(a), cdf_of(b, atom));
}

DensityDistance density_distance(const Histogram& a, const Histogram& b) {
  require_same_grid(a.grid, b.grid);
  return compare(a.grid, cdf_of(a), cdf_of(b));
}

DensityDistance density_distance(const GridDensity& a, std::size_t atom_a, const GridDensity& b, std::size_t atom_b) {
  require_same_grid(a.grid, b.grid);
  return compare(a.grid, cdf_of(a, atom_a), cdf_of(b, atom_b));
}

}  // namespace icadyn
