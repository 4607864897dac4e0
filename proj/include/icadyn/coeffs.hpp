#pragma once

// Coefficients of the high-dimensional limit of the online ICA update:
//
//   Lambda(Q)        = tau^2 < f^2(u) >
//   G(Q)             = g_sign * ( -tau < f(u) c > + tau Q < f'(u) > )
//   Gamma(x,xi,Q,R)  = x [Q G + tau R - Lambda/2] - xi G - tau phi(x)
//
// with u = c Q + e sqrt(1 - Q^2), c ~ source, e ~ N(0,1), and <.> the joint
// average, evaluated as atoms x Gauss-Hermite nodes.

#include <string>
#include <string_view>

#include "icadyn/model.hpp"
#include "icadyn/quadrature.hpp"

namespace icadyn {

class Nonlinearity {
public:
  enum class Kind { cube, neg_cube, square, neg_square, tanh, neg_tanh, zero };

  explicit Nonlinearity(Kind kind) : kind_(kind) {}
  static Nonlinearity parse(std::string_view name);

  double value(double x) const;
  double derivative(double x) const;

  Kind kind() const { return kind_; }
  std::string name() const;

private:
  Kind kind_;
};

class Regularizer {
public:
  enum class Kind { none, l2, l1 };

  Regularizer() = default;
  Regularizer(Kind kind, double beta);
  static Regularizer parse(std::string_view name, double beta);

  // phi(x); sgn(0) = 0 for l1.
  double phi(double x) const {
    switch (kind_) {
      case Kind::none: return 0.0;
      case Kind::l2: return beta_ * x;
      case Kind::l1: return x > 0.0 ? beta_ : (x < 0.0 ? -beta_ : 0.0);
    }
    return 0.0;
  }
  // Phi with Phi(0) = 0 and Phi' = phi.
  double antiderivative(double x) const;

  Kind kind() const { return kind_; }
  double beta() const { return beta_; }
  std::string name() const;

private:
  Kind kind_ = Kind::none;
  double beta_ = 0.0;
};

enum class Integrand { f_sq, f_times_c, f_prime };

class CoeffContext {
public:
  static constexpr int kDefaultNodes = 40;

  CoeffContext(Nonlinearity f, Regularizer phi, SourceDist source, double tau, int g_sign = +1,
               int n_nodes = kDefaultNodes);

  const Nonlinearity& f() const { return f_; }
  const Regularizer& phi() const { return phi_; }
  const SourceDist& source() const { return source_; }
  const QuadratureRule& quad() const { return quad_; }
  double tau() const { return tau_; }
  int g_sign() const { return g_sign_; }

  CoeffContext with_tau(double tau) const;
  CoeffContext with_g_sign(int g_sign) const;

private:
  Nonlinearity f_;
  Regularizer phi_;
  SourceDist source_;
  QuadratureRule quad_;
  double tau_;
  int g_sign_;
};

double gauss_average(const CoeffContext& ctx, double Q, Integrand integrand);

double lambda_coeff(const CoeffContext& ctx, double Q);
double g_coeff(const CoeffContext& ctx, double Q);
double gamma_coeff(const CoeffContext& ctx, double x, double xi, double Q, double R);

// G and Lambda frozen at one (Q, R), so the drift can be evaluated per
// particle or per cell without redoing the quadrature.
struct DriftCoefficients {
  double G = 0.0;
  double Lambda = 0.0;
  double slope = 0.0;  // Q G + tau R - Lambda / 2
  double tau = 0.0;
  Regularizer phi;

  double gamma(double x, double xi) const { return x * slope - xi * G - tau * phi.phi(x); }
};

DriftCoefficients drift_coefficients(const CoeffContext& ctx, double Q, double R);

struct EffectivePotential {
  double d;
  double b;
  double tau;
  Regularizer phi;

  // E(x, xi) = d/2 (x - b xi)^2 + tau Phi(x)
  double energy(double x, double xi) const;
  // dE/dx where phi is differentiable; equals -Gamma.
  double gradient(double x, double xi) const;
};

// Throws NumericError when |d| <= 1e-14 (b undefined).
EffectivePotential effective_potential(const CoeffContext& ctx, double Q, double R);

// Closed forms for the cubic nonlinearity in the orientation used by the
// Example-1 ODE, dq/dt = -2 tau q^2 (1-q)(m4-3) - ... : G = tau Q^3 (m4 - 3).
// The update rule realises this orientation with f(x) = -x^3; for f(x) = +x^3
// the quadrature path returns the negative of closed_form_g_cube.
double closed_form_g_cube(double tau, double Q, double m4);
double closed_form_lambda_cube(double tau, double Q, double m4, double m6);

}  // namespace icadyn
