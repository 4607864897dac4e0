#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace icadyn {

// Uniform cell-centred grid on [x_min, x_max].
struct Grid1D {
  double x_min = -8.0;
  double x_max = 8.0;
  std::size_t n_cells = 1024;

  // Throws ConfigError unless x_max > x_min and n_cells >= 64.
  Grid1D(double lo, double hi, std::size_t cells);
  Grid1D() = default;

  double h() const { return (x_max - x_min) / static_cast<double>(n_cells); }
  double center(std::size_t i) const { return x_min + (static_cast<double>(i) + 0.5) * h(); }
  double face(std::size_t i) const { return x_min + static_cast<double>(i) * h(); }
  std::vector<double> centers() const;

  // Cell index of x, or -1 / n_cells when outside.
  std::ptrdiff_t locate(double x) const;

  bool operator==(const Grid1D&) const = default;
};

// Sample counts binned on a Grid1D; mass outside the grid is kept in the
// under/overflow counters so CDFs stay exact at the cell faces.
struct Histogram {
  Grid1D grid;
  std::vector<double> counts;
  double underflow = 0.0;
  double overflow = 0.0;
  double total = 0.0;

  explicit Histogram(const Grid1D& g) : grid(g), counts(g.n_cells, 0.0) {}

  void add(double x);
  // counts / (total h)
  std::vector<double> density() const;
};

Histogram make_histogram(const Grid1D& grid, std::span<const double> samples);

}  // namespace icadyn
