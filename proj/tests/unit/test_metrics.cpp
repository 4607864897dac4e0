#include <catch_amalgamated.hpp>

#include <cmath>
#include <memory>
#include <vector>

#include "icadyn/errors.hpp"
#include "icadyn/metrics.hpp"

using namespace icadyn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

void check_monotone(const RocCurve& roc) {
  for (std::size_t k = 1; k < roc.thresholds.size(); ++k) {
    REQUIRE(roc.thresholds[k] >= roc.thresholds[k - 1]);
    CHECK(roc.tpr[k] <= roc.tpr[k - 1]);
    CHECK(roc.fpr[k] <= roc.fpr[k - 1]);
  }
}

}  // namespace

TEST_CASE("separable metrics on a finite state", "[metrics]") {
  const auto xi = std::make_shared<const FeatureVector>(make_sparse_feature(2000, 0.3, 1));
  const auto phi = Regularizer::parse("l1", 0.7);
  Rng rng(4);
  const auto s = init_state(xi, 0.4, phi, rng);
  CHECK_THAT(separable_metric(s, Functional::correlation), WithinAbs(s.Qn, 1e-15));
  CHECK_THAT(separable_metric(s, Functional::l2_error), WithinAbs(2.0 * (1.0 - s.Qn), 1e-9));
  CHECK_THAT(separable_metric(s, Functional::x_phi, phi), WithinAbs(s.Rn, 1e-14));
  CHECK_THAT(separable_metric(s, Functional::x_phi, phi), WithinRel(0.7 * separable_metric(s, Functional::abs), 1e-12));
  CHECK(parse_functional("l2_error") == Functional::l2_error);
  CHECK(functional_name(Functional::x_phi) == "x_phi");
  CHECK_THROWS_AS(parse_functional("entropy"), ConfigError);
}

TEST_CASE("separable metrics on a density", "[metrics]") {
  const Grid1D grid(-8.0, 8.0, 1024);
  const auto d = init_density(PriorMeasure::sparse(0.3), 0.49, grid);
  const auto phi = Regularizer::parse("l1", 1.0);
  const auto c = compute_couplings(d, phi);
  CHECK_THAT(separable_metric(d, Functional::correlation), WithinAbs(c.Q, 1e-12));
  CHECK_THAT(separable_metric(d, Functional::x_phi, phi), WithinAbs(c.R, 1e-12));
  CHECK_THAT(c.Q, WithinAbs(0.7, 1e-6));
  // E (x - xi)^2 = E x^2 + E xi^2 - 2Q with both second moments 1
  CHECK_THAT(separable_metric(d, Functional::l2_error), WithinAbs(2.0 * (1.0 - c.Q), 1e-4));
}

TEST_CASE("roc from a finite state", "[metrics]") {
  const std::vector<double> x{0.5, 2.0, -0.1, -3.0, 0.0, 1.5};
  const std::vector<double> xi{0.0, 1.0, 0.0, 1.0, 0.0, 1.0};
  const std::vector<double> th{0.0, 0.05, 1.0, 1.5, 2.5, 10.0};
  const auto roc = roc_from_simulation(x, xi, th);
  CHECK(roc.tpr == std::vector<double>{1.0, 1.0, 1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0});
  CHECK(roc.fpr == std::vector<double>{1.0, 2.0 / 3.0, 0.0, 0.0, 0.0, 0.0});
  check_monotone(roc);

  const std::vector<double> neg{-0.1};
  CHECK_THROWS_AS(roc_from_simulation(x, xi, neg), DomainError);
  const std::vector<double> all_zero(6, 0.0), all_one(6, 1.0);
  CHECK_THROWS_AS(roc_from_simulation(x, all_zero, th), DomainError);
  CHECK_THROWS_AS(roc_from_simulation(x, all_one, th), DomainError);
}

TEST_CASE("roc from a simulated state is monotone with the right corners", "[metrics]") {
  const auto xi = std::make_shared<const FeatureVector>(make_sparse_feature(5000, 0.3, 2));
  Rng rng(6);
  const auto s = init_state(xi, 0.5, {}, rng);
  double xmax = 0.0;
  for (double v : s.x) xmax = std::max(xmax, std::abs(v));
  auto th = default_thresholds(xmax + 1.0);
  const auto roc = roc_from_simulation(s, th);
  CHECK(roc.tpr.front() == 1.0);
  CHECK(roc.fpr.front() == 1.0);
  CHECK(roc.tpr.back() == 0.0);
  CHECK(roc.fpr.back() == 0.0);
  check_monotone(roc);
  const double area = auc(roc);
  CHECK(area > 0.5);
  CHECK(area <= 1.0);
}

TEST_CASE("roc from a density", "[metrics]") {
  const Grid1D grid(-8.0, 8.0, 1024);
  const auto d = init_density(PriorMeasure::sparse(0.3), 0.5, grid);
  const auto th = default_thresholds(8.0);
  const auto roc = roc_from_pde(d, th);
  CHECK_THAT(roc.tpr.front(), WithinAbs(1.0, 1e-8));
  CHECK_THAT(roc.fpr.front(), WithinAbs(1.0, 1e-8));
  CHECK_THAT(roc.fpr.back(), WithinAbs(0.0, 1e-8));
  check_monotone(roc);

  // P(x | 0) is a centred Gaussian: FPR = 2 P(x > theta), with variance 1 - q0.
  for (std::size_t k = 1; k < th.size(); k += 20) {
    const double upper = 0.5 * std::erfc(th[k] / std::sqrt(2.0 * 0.5));
    CHECK_THAT(roc.fpr[k], WithinAbs(2.0 * upper, 1e-4));
  }
  // a threshold on a cell face inside the grid splits exactly
  const double face = grid.face(600);
  const std::vector<double> one{face};
  double tail = 0.0;
  for (std::size_t i = 600; i < 1024; ++i) tail += d.atoms[0].density[i];
  for (std::size_t i = 0; i < 1024 - 600; ++i) tail += d.atoms[0].density[i];
  CHECK_THAT(roc_from_pde(d, one).fpr[0], WithinAbs(tail * grid.h(), 1e-12));

  CHECK_THROWS_AS(roc_from_pde(init_density(PriorMeasure::point(), 0.5, grid), th), DomainError);
}

TEST_CASE("default thresholds", "[metrics]") {
  const auto th = default_thresholds(5.0, 200);
  REQUIRE(th.size() == 201);
  CHECK(th[0] == 0.0);
  CHECK_THAT(th[1], WithinRel(1e-3, 1e-12));
  CHECK_THAT(th.back(), WithinRel(5.0, 1e-12));
  CHECK_THAT(th[2] / th[1], WithinRel(th[200] / th[199], 1e-9));
  CHECK_THROWS_AS(default_thresholds(1e-4), DomainError);
}

TEST_CASE("auc of extreme classifiers", "[metrics]") {
  RocCurve perfect{{0.0, 1.0}, {1.0, 1.0}, {1.0, 0.0}};
  CHECK_THAT(auc(perfect), WithinAbs(1.0, 1e-15));
  RocCurve chance{{0.0, 1.0, 2.0}, {1.0, 0.5, 0.0}, {1.0, 0.5, 0.0}};
  CHECK_THAT(auc(chance), WithinAbs(0.5, 1e-15));
}

TEST_CASE("density distances", "[metrics]") {
  const Grid1D grid(-4.0, 4.0, 128);
  SECTION("identical inputs") {
    const auto d = init_density(PriorMeasure::point(), 0.3, Grid1D(-8.0, 8.0, 128));
    const auto dd = density_distance(d, 0, d, 0);
    CHECK(dd.ks == 0.0);
    CHECK(dd.w1 == 0.0);
    Histogram h(grid);
    for (double x : {-1.0, 0.3, 0.3, 2.0}) h.add(x);
    CHECK(density_distance(h, h).ks == 0.0);
  }
  SECTION("point masses") {
    const double a = grid.center(40), b = grid.center(90);
    Histogram ha(grid), hb(grid);
    ha.add(a);
    hb.add(b);
    const auto dd = density_distance(ha, hb);
    CHECK(dd.ks == 1.0);
    CHECK_THAT(dd.w1, WithinRel(std::abs(a - b), 1e-12));
    const auto rev = density_distance(hb, ha);
    CHECK(rev.ks == dd.ks);
    CHECK(rev.w1 == dd.w1);
  }
  SECTION("samples against their own density") {
    const Grid1D fine(-8.0, 8.0, 1024);
    const auto d = init_density(PriorMeasure::point(), 0.0, fine);
    Rng rng(12);
    Histogram h(fine);
    for (int i = 0; i < 100000; ++i) h.add(rng.normal());
    const auto dd = density_distance(h, d, 0);
    CHECK(dd.ks < 0.01);
    CHECK(dd.w1 < 0.02);
    CHECK(dd.ks <= 1.0);
  }
  SECTION("mass outside the grid enters the histogram CDF") {
    Histogram h(grid);
    h.add(-10.0);
    h.add(0.0);
    Histogram g(grid);
    g.add(grid.center(0));
    g.add(0.0);
    // underflow sits below the first face, the first-cell sample just above it
    CHECK_THAT(density_distance(h, g).ks, WithinAbs(0.5, 1e-15));
  }
  SECTION("grid mismatch") {
    Histogram a(grid), b(Grid1D(-4.0, 4.0, 256));
    a.add(0.0);
    b.add(0.0);
    CHECK_THROWS_AS(density_distance(a, b), DomainError);
    Histogram empty(grid);
    CHECK_THROWS_AS(density_distance(empty, a), DomainError);
  }
}
