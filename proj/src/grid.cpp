#include "icadyn/grid.hpp"

#include <cmath>

#include "icadyn/errors.hpp"

namespace icadyn {

Grid1D::Grid1D(double lo, double hi, std::size_t cells) : x_min(lo), x_max(hi), n_cells(cells) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw ConfigError("grid: x_max must exceed x_min");
  }
  if (cells < 64) throw ConfigError("grid: n_cells must be >= 64");
}

std::vector<double> Grid1D::centers() const {
  std::vector<double> c(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) c[i] = center(i);
  return c;
}

std::ptrdiff_t Grid1D::locate(double x) const {
  if (x < x_min) return -1;
  if (x >= x_max) return static_cast<std::ptrdiff_t>(n_cells);
  auto i = static_cast<std::ptrdiff_t>(std::floor((x - x_min) / h()));
  if (i >= static_cast<std::ptrdiff_t>(n_cells)) i = static_cast<std::ptrdiff_t>(n_cells) - 1;
  return i;
}

void Histogram::add(double x) {
  const auto i = grid.locate(x);
  if (i < 0) {
    underflow += 1.0;
  } else if (i >= static_cast<std::ptrdiff_t>(grid.n_cells)) {
    overflow += 1.0;
  } else {
    counts[static_cast<std::size_t>(i)] += 1.0;
  }
  total += 1.0;
}

std::vector<double> Histogram::density() const {
  std::vector<double> d(counts.size(), 0.0);
  if (total <= 0.0) return d;
  const double norm = 1.0 / (total * grid.h());
  for (std::size_t i = 0; i < counts.size(); ++i) d[i] = counts[i] * norm;
  return d;
}

Histogram make_histogram(const Grid1D& grid, std::span<const double> samples) {
  Histogram h(grid);
  for (double x : samples) h.add(x);
  return h;
}

}  // namespace icadyn
