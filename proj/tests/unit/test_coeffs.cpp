#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "icadyn/coeffs.hpp"
#include "icadyn/errors.hpp"
#include "icadyn/rng.hpp"

using namespace icadyn;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

using K = Nonlinearity::Kind;

CoeffContext make_ctx(K kind, SourceDist src, double tau, int g_sign = 1,
                      Regularizer phi = Regularizer{}, int nodes = CoeffContext::kDefaultNodes) {
  return CoeffContext(Nonlinearity(kind), phi, std::move(src), tau, g_sign, nodes);
}

// Asymmetric two-point law: mean 0, variance 1.
SourceDist skewed() { return SourceDist({{-2.0, 0.2}, {0.5, 0.8}}); }

std::vector<SourceDist> all_sources() {
  return {SourceDist::rademacher(), SourceDist::three_point(), SourceDist::gaussian_matching(8), skewed()};
}

double simpson(const Regularizer& r, double a, double b, int m = 2000) {
  const double h = (b - a) / m;
  double s = r.phi(a) + r.phi(b);
  for (int i = 1; i < m; ++i) s += (i % 2 ? 4.0 : 2.0) * r.phi(a + i * h);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("nonlinearity derivatives match central differences", "[coeffs]") {
  const double probes[] = {-2.5, -1.0, -0.3, 0.2, 0.7, 1.9, 3.0};
  for (auto kind : {K::cube, K::neg_cube, K::square, K::neg_square, K::tanh, K::neg_tanh}) {
    const Nonlinearity f(kind);
    for (double x : probes) {
      const double h = 1e-5;
      const double fd = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
      CHECK_THAT(f.derivative(x), WithinRel(fd, 1e-6));
    }
  }
  CHECK(Nonlinearity::parse("neg_tanh").kind() == K::neg_tanh);
  CHECK_THROWS_AS(Nonlinearity::parse("sin"), ConfigError);
}

TEST_CASE("regularizer antiderivative integrates phi", "[coeffs]") {
  const std::vector<std::pair<double, double>> intervals{{-2.0, 1.5}, {0.3, 2.0}, {-1.7, -0.2}, {-1.0, 1.0}};
  for (const auto& r : {Regularizer::parse("l2", 0.7), Regularizer::parse("l1", 1.3)}) {
    for (auto [a, b] : intervals) {
      double numeric = 0.0;
      if (a < 0.0 && b > 0.0) {
        // one-sided limits of phi at the kink
        numeric = simpson(r, a, -1e-300) + simpson(r, 1e-300, b);
      } else {
        numeric = simpson(r, a, b);
      }
      CHECK_THAT(r.antiderivative(b) - r.antiderivative(a), WithinAbs(numeric, 1e-8));
    }
  }
  const Regularizer none;
  for (double x : {-3.0, 0.0, 2.0}) {
    CHECK(none.phi(x) == 0.0);
    CHECK(none.antiderivative(x) == 0.0);
  }
  CHECK(Regularizer::parse("l1", 2.0).phi(0.0) == 0.0);
  CHECK_THROWS_AS(Regularizer::parse("l1", -1.0), ConfigError);
  CHECK_THROWS_AS(Regularizer::parse("huber", 1.0), ConfigError);
}

TEST_CASE("coefficient context validation", "[coeffs]") {
  CHECK_THROWS_AS(make_ctx(K::cube, SourceDist::rademacher(), 0.0), ConfigError);
  CHECK_THROWS_AS(make_ctx(K::cube, SourceDist::rademacher(), -0.1), ConfigError);
  CHECK_THROWS_AS(make_ctx(K::cube, SourceDist::rademacher(), 0.1, 0), ConfigError);
  const auto ctx = make_ctx(K::cube, SourceDist::rademacher(), 0.1);
  CHECK_THROWS_AS(ctx.with_g_sign(2), ConfigError);
  CHECK(ctx.with_tau(0.3).tau() == 0.3);
}

TEST_CASE("gauss_average examples", "[coeffs]") {
  const auto ctx = make_ctx(K::cube, SourceDist::rademacher(), 0.1);
  CHECK_THAT(gauss_average(ctx, 0.0, Integrand::f_sq), WithinAbs(15.0, 1e-10));
  CHECK_THAT(gauss_average(ctx, 0.0, Integrand::f_times_c), WithinAbs(0.0, 1e-12));
  for (const auto& src : all_sources()) {
    const auto c = make_ctx(K::cube, src, 0.1);
    for (double Q = -1.0; Q <= 1.0 + 1e-9; Q += 0.125) {
      CHECK_THAT(gauss_average(c, Q, Integrand::f_prime), WithinAbs(3.0, 1e-11));
    }
  }
  CHECK_THROWS_AS(gauss_average(ctx, 1.01, Integrand::f_sq), DomainError);
  CHECK_THROWS_AS(lambda_coeff(ctx, -1.5), DomainError);
  CHECK_THROWS_AS(g_coeff(ctx, 2.0), DomainError);
  CHECK_THROWS_AS(gamma_coeff(ctx, 0.0, 0.0, 1.2, 0.0), DomainError);
}

TEST_CASE("lambda examples and closed form", "[coeffs]") {
  CHECK_THAT(lambda_coeff(make_ctx(K::cube, SourceDist::rademacher(), 0.1), 0.0), WithinAbs(0.15, 1e-12));
  CHECK_THAT(lambda_coeff(make_ctx(K::cube, SourceDist::rademacher(), 0.1), 1.0), WithinAbs(0.01, 1e-12));
  CHECK_THAT(closed_form_lambda_cube(1.0, 0.0, 1.0, 1.0), WithinAbs(15.0, 1e-14));
  CHECK_THAT(closed_form_lambda_cube(1.0, 1.0, 3.0, 15.0), WithinAbs(15.0, 1e-14));
  CHECK_THAT(closed_form_g_cube(1.0, 1.0, 3.0), WithinAbs(0.0, 1e-15));

  for (int nodes : {8, 20, 40}) {
    for (const auto& src : all_sources()) {
      for (auto kind : {K::cube, K::neg_cube}) {
        const auto ctx = make_ctx(kind, src, 0.3, 1, Regularizer{}, nodes);
        for (int i = 0; i <= 10; ++i) {
          const double Q = 0.1 * i;
          CHECK_THAT(lambda_coeff(ctx, Q),
                     WithinAbs(closed_form_lambda_cube(0.3, Q, src.m4(), src.m6()), 1e-10));
        }
      }
    }
  }
}

TEST_CASE("lambda is nonnegative", "[coeffs]") {
  for (auto kind : {K::cube, K::square, K::tanh, K::neg_tanh}) {
    for (const auto& src : all_sources()) {
      const auto ctx = make_ctx(kind, src, 0.2);
      for (double Q = -1.0; Q <= 1.0 + 1e-9; Q += 0.05) CHECK(lambda_coeff(ctx, Q) >= 0.0);
    }
  }
}

TEST_CASE("G examples and orientation", "[coeffs]") {
  for (auto kind : {K::cube, K::neg_cube, K::square, K::tanh}) {
    CHECK_THAT(g_coeff(make_ctx(kind, SourceDist::three_point(), 0.1), 0.0), WithinAbs(0.0, 1e-14));
  }
  // The closed form tau Q^3 (m4 - 3) is what the update realises with
  // f = -x^3; with f = +x^3 the same number needs g_sign = -1.
  CHECK_THAT(g_coeff(make_ctx(K::neg_cube, SourceDist::rademacher(), 0.05), 1.0), WithinAbs(-0.1, 1e-12));
  CHECK_THAT(g_coeff(make_ctx(K::cube, SourceDist::rademacher(), 0.05, -1), 1.0), WithinAbs(-0.1, 1e-12));
  CHECK_THAT(g_coeff(make_ctx(K::cube, SourceDist::rademacher(), 0.05), 1.0), WithinAbs(0.1, 1e-12));
  CHECK_THAT(g_coeff(make_ctx(K::neg_cube, SourceDist::rademacher(), 0.02), 0.5), WithinAbs(-0.005, 1e-12));

  for (const auto& src : all_sources()) {
    const auto neg = make_ctx(K::neg_cube, src, 0.07);
    const auto pos = make_ctx(K::cube, src, 0.07);
    for (int i = 0; i <= 20; ++i) {
      const double Q = 0.05 * i;
      const double closed = closed_form_g_cube(0.07, Q, src.m4());
      CHECK_THAT(g_coeff(neg, Q), WithinAbs(closed, 1e-10));
      CHECK_THAT(g_coeff(pos, Q), WithinAbs(-closed, 1e-10));
      CHECK_THAT(g_coeff(pos.with_g_sign(-1), Q), WithinAbs(closed, 1e-10));
    }
  }
}

TEST_CASE("tanh averages agree with Monte-Carlo", "[coeffs]") {
  const auto ctx = make_ctx(K::tanh, SourceDist::three_point(), 1.0);
  const double Q = 0.6, s = 0.8;
  Rng rng(99);
  constexpr int N = 400000;
  double m_fc = 0.0, m_fc2 = 0.0, m_f2 = 0.0, m_f22 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double c = ctx.source().sample(rng);
    const double u = c * Q + rng.normal() * s;
    const double fc = std::tanh(u) * c;
    const double f2 = std::tanh(u) * std::tanh(u);
    m_fc += fc;
    m_fc2 += fc * fc;
    m_f2 += f2;
    m_f22 += f2 * f2;
  }
  m_fc /= N;
  m_f2 /= N;
  const double se_fc = std::sqrt((m_fc2 / N - m_fc * m_fc) / N);
  const double se_f2 = std::sqrt((m_f22 / N - m_f2 * m_f2) / N);
  CHECK(std::abs(gauss_average(ctx, Q, Integrand::f_times_c) - m_fc) < 5.0 * se_fc);
  CHECK(std::abs(gauss_average(ctx, Q, Integrand::f_sq) - m_f2) < 5.0 * se_f2);
}

TEST_CASE("gamma examples", "[coeffs]") {
  const auto ctx = make_ctx(K::neg_cube, SourceDist::rademacher(), 0.02);
  CHECK(gamma_coeff(ctx, 0.0, 0.0, 0.4, 0.3) == 0.0);
  const double L0 = lambda_coeff(ctx, 0.0);
  for (double x : {-1.5, 0.2, 2.0}) {
    CHECK_THAT(gamma_coeff(ctx, x, 1.0, 0.0, 0.0), WithinAbs(-0.5 * L0 * x, 1e-14));
  }
  const double G = -0.005;
  const double L = closed_form_lambda_cube(0.02, 0.5, 1.0, 1.0);
  CHECK_THAT(gamma_coeff(ctx, 1.0, 1.0, 0.5, 0.0), WithinAbs(1.0 * (0.5 * G - 0.5 * L) - G, 1e-12));
}

TEST_CASE("gamma is affine in x, with a single jump at 0 for l1", "[coeffs]") {
  for (const auto& phi : {Regularizer{}, Regularizer::parse("l2", 0.4)}) {
    const auto ctx = make_ctx(K::tanh, SourceDist::three_point(), 0.1, 1, phi);
    for (double x1 : {-2.0, -0.5, 0.7}) {
      for (double x2 : {-1.0, 0.3, 2.5}) {
        const double mid = gamma_coeff(ctx, 0.5 * (x1 + x2), 1.2, 0.6, 0.3);
        const double avg = 0.5 * (gamma_coeff(ctx, x1, 1.2, 0.6, 0.3) + gamma_coeff(ctx, x2, 1.2, 0.6, 0.3));
        CHECK_THAT(mid, WithinAbs(avg, 1e-13));
      }
    }
  }
  const double beta = 0.8, tau = 0.1;
  const auto ctx = make_ctx(K::neg_cube, SourceDist::rademacher(), tau, 1, Regularizer::parse("l1", beta));
  const double eps = 1e-9;
  const double jump = gamma_coeff(ctx, eps, 1.0, 0.5, 0.2) - gamma_coeff(ctx, -eps, 1.0, 0.5, 0.2);
  CHECK_THAT(jump, WithinAbs(-2.0 * tau * beta, 1e-8));
  // affine on each side
  for (double sign : {-1.0, 1.0}) {
    const double a = gamma_coeff(ctx, sign * 0.5, 1.0, 0.5, 0.2);
    const double b = gamma_coeff(ctx, sign * 1.5, 1.0, 0.5, 0.2);
    const double m = gamma_coeff(ctx, sign * 1.0, 1.0, 0.5, 0.2);
    CHECK_THAT(m, WithinAbs(0.5 * (a + b), 1e-13));
  }
}

TEST_CASE("effective potential", "[coeffs]") {
  const auto ctx = make_ctx(K::neg_cube, SourceDist::rademacher(), 0.1);
  SECTION("Q = 0 has b = 0 and curvature Lambda/2 - tau R") {
    const double R = 0.3;
    const auto ep = effective_potential(ctx, 0.0, R);
    CHECK_THAT(ep.d, WithinAbs(0.5 * lambda_coeff(ctx, 0.0) - 0.1 * R, 1e-14));
    CHECK_THAT(ep.b, WithinAbs(0.0, 1e-14));
  }
  SECTION("gradient vanishes at x = b xi without a regularizer") {
    for (double Q : {0.2, 0.5, 0.9}) {
      const auto ep = effective_potential(ctx, Q, 0.0);
      for (double xi : {0.0, 1.0, 1.8}) CHECK_THAT(ep.gradient(ep.b * xi, xi), WithinAbs(0.0, 1e-14));
    }
  }
  SECTION("gradient equals -Gamma at random probes") {
    Rng rng(3);
    for (const auto& phi : {Regularizer{}, Regularizer::parse("l2", 0.5), Regularizer::parse("l1", 1.0)}) {
      const auto c = make_ctx(K::neg_cube, SourceDist::three_point(), 0.1, 1, phi);
      for (int i = 0; i < 100; ++i) {
        const double x = 6.0 * rng.uniform() - 3.0;
        const double xi = 4.0 * rng.uniform() - 2.0;
        const double Q = 2.0 * rng.uniform() - 1.0;
        const double R = rng.uniform();
        const auto ep = effective_potential(c, Q, R);
        CHECK_THAT(ep.gradient(x, xi), WithinAbs(-gamma_coeff(c, x, xi, Q, R), 1e-12));
        const double h = 1e-6;
        if (std::abs(x) > 2 * h) {
          const double fd = (ep.energy(x + h, xi) - ep.energy(x - h, xi)) / (2 * h);
          CHECK_THAT(fd, WithinAbs(ep.gradient(x, xi), 1e-6));
        }
      }
    }
  }
  SECTION("singular curvature is reported") {
    // Q = 0: d = Lambda(0)/2 - tau R vanishes at R = Lambda(0) / (2 tau).
    const double R = lambda_coeff(ctx, 0.0) / (2.0 * 0.1);
    CHECK_THROWS_AS(effective_potential(ctx, 0.0, R), NumericError);
  }
}
