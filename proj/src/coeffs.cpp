#include "icadyn/coeffs.hpp"

#include <algorithm>
#include <cmath>

#include "icadyn/errors.hpp"

namespace icadyn {

Nonlinearity Nonlinearity::parse(std::string_view name) {
  if (name == "cube") return Nonlinearity(Kind::cube);
  if (name == "neg_cube") return Nonlinearity(Kind::neg_cube);
  if (name == "square") return Nonlinearity(Kind::square);
  if (name == "neg_square") return Nonlinearity(Kind::neg_square);
  if (name == "tanh") return Nonlinearity(Kind::tanh);
  if (name == "neg_tanh") return Nonlinearity(Kind::neg_tanh);
  if (name == "zero") return Nonlinearity(Kind::zero);
  throw ConfigError("unknown nonlinearity '" + std::string(name) + "'");
}

std::string Nonlinearity::name() const {
  switch (kind_) {
    case Kind::cube: return "cube";
    case Kind::neg_cube: return "neg_cube";
    case Kind::square: return "square";
    case Kind::neg_square: return "neg_square";
    case Kind::tanh: return "tanh";
    case Kind::neg_tanh: return "neg_tanh";
    case Kind::zero: return "zero";
  }
  return "?";
}

double Nonlinearity::value(double x) const {
  switch (kind_) {
    case Kind::cube: return x * x * x;
    case Kind::neg_cube: return -x * x * x;
    case Kind::square: return x * x;
    case Kind::neg_square: return -x * x;
    case Kind::tanh: return std::tanh(x);
    case Kind::neg_tanh: return -std::tanh(x);
    case Kind::zero: return 0.0;
  }
  return 0.0;
}

double Nonlinearity::derivative(double x) const {
  switch (kind_) {
    case Kind::cube: return 3.0 * x * x;
    case Kind::neg_cube: return -3.0 * x * x;
    case Kind::square: return 2.0 * x;
    case Kind::neg_square: return -2.0 * x;
    case Kind::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Kind::neg_tanh: {
      const double t = std::tanh(x);
      return t * t - 1.0;
    }
    case Kind::zero: return 0.0;
  }
  return 0.0;
}

Regularizer::Regularizer(Kind kind, double beta) : kind_(kind), beta_(beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("regularizer: beta must be >= 0");
  if (kind == Kind::none) beta_ = 0.0;
}

Regularizer Regularizer::parse(std::string_view name, double beta) {
  if (name == "none") return Regularizer(Kind::none, 0.0);
  if (name == "l2") return Regularizer(Kind::l2, beta);
  if (name == "l1") return Regularizer(Kind::l1, beta);
  throw ConfigError("unknown regularizer '" + std::string(name) + "'");
}

std::string Regularizer::name() const {
  switch (kind_) {
    case Kind::none: return "none";
    case Kind::l2: return "l2";
    case Kind::l1: return "l1";
  }
  return "?";
}

double Regularizer::antiderivative(double x) const {
  switch (kind_) {
    case Kind::none: return 0.0;
    case Kind::l2: return 0.5 * beta_ * x * x;
    case Kind::l1: return beta_ * std::abs(x);
  }
  return 0.0;
}

CoeffContext::CoeffContext(Nonlinearity f, Regularizer phi, SourceDist source, double tau,
                           int g_sign, int n_nodes)
    : f_(f),
      phi_(phi),
      source_(std::move(source)),
      quad_(QuadratureRule::gauss_hermite(n_nodes)),
      tau_(tau),
      g_sign_(g_sign) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("coefficient context: tau must be > 0");
  if (g_sign != 1 && g_sign != -1) throw ConfigError("coefficient context: g_sign must be +1 or -1");
}

CoeffContext CoeffContext::with_tau(double tau) const {
  if (!(tau > 0.0)) throw ConfigError("coefficient context: tau must be > 0");
  CoeffContext copy = *this;
  copy.tau_ = tau;
  return copy;
}

CoeffContext CoeffContext::with_g_sign(int g_sign) const {
  if (g_sign != 1 && g_sign != -1) throw ConfigError("coefficient context: g_sign must be +1 or -1");
  CoeffContext copy = *this;
  copy.g_sign_ = g_sign;
  return copy;
}

double gauss_average(const CoeffContext& ctx, double Q, Integrand integrand) {
  if (!(std::abs(Q) <= 1.0 + 1e-12)) {
    throw DomainError("gauss_average: |Q| must be <= 1");
  }
  const double s = std::sqrt(std::max(0.0, 1.0 - Q * Q));
  const auto& f = ctx.f();
  const auto& quad = ctx.quad();
  double acc = 0.0;
  for (const auto& atom : ctx.source().atoms()) {
    const double c = atom.value;
    double inner = 0.0;
    for (std::size_t k = 0; k < quad.nodes.size(); ++k) {
      const double u = c * Q + quad.nodes[k] * s;
      double v = 0.0;
      switch (integrand) {
        case Integrand::f_sq: {
          const double fu = f.value(u);
          v = fu * fu;
          break;
        }
        case Integrand::f_times_c: v = f.value(u) * c; break;
        case Integrand::f_prime: v = f.derivative(u); break;
      }
      inner += quad.weights[k] * v;
    }
    acc += atom.weight * inner;
  }
  return acc;
}

double lambda_coeff(const CoeffContext& ctx, double Q) {
  return ctx.tau() * ctx.tau() * gauss_average(ctx, Q, Integrand::f_sq);
}

double g_coeff(const CoeffContext& ctx, double Q) {
  const double tau = ctx.tau();
  const double literal = -tau * gauss_average(ctx, Q, Integrand::f_times_c) +
                         tau * Q * gauss_average(ctx, Q, Integrand::f_prime);
  return ctx.g_sign() * literal;
}

DriftCoefficients drift_coefficients(const CoeffContext& ctx, double Q, double R) {
  DriftCoefficients dc;
  dc.G = g_coeff(ctx, Q);
  dc.Lambda = lambda_coeff(ctx, Q);
  dc.tau = ctx.tau();
  dc.slope = Q * dc.G + ctx.tau() * R - 0.5 * dc.Lambda;
  dc.phi = ctx.phi();
  return dc;
}

double gamma_coeff(const CoeffContext& ctx, double x, double xi, double Q, double R) {
  return drift_coefficients(ctx, Q, R).gamma(x, xi);
}

double EffectivePotential::energy(double x, double xi) const {
  const double r = x - b * xi;
  return 0.5 * d * r * r + tau * phi.antiderivative(x);
}

double EffectivePotential::gradient(double x, double xi) const {
  return d * (x - b * xi) + tau * phi.phi(x);
}

// Curvature d = Lambda/2 - Q G - tau R and centre b = -G / d, so that
// dE/dx = -Gamma. d > 0 whenever the drift contracts, i.e. E is convex for
// convex Phi.
EffectivePotential effective_potential(const CoeffContext& ctx, double Q, double R) {
  const auto dc = drift_coefficients(ctx, Q, R);
  const double d = -dc.slope;
  if (std::abs(d) <= 1e-14) throw NumericError("effective_potential: d = 0, b undefined");
  return EffectivePotential{d, -dc.G / d, ctx.tau(), ctx.phi()};
}

double closed_form_g_cube(double tau, double Q, double m4) {
  return tau * Q * Q * Q * (m4 - 3.0);
}

double closed_form_lambda_cube(double tau, double Q, double m4, double m6) {
  const double Q2 = Q * Q;
  const double Q4 = Q2 * Q2;
  return tau * tau * (15.0 + 15.0 * Q4 * (1.0 - Q2) * (m4 - 3.0) + Q4 * Q2 * (m6 - 15.0));
}

}  // namespace icadyn
