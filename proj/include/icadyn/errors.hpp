#pragma once

#include <stdexcept>
#include <string>

namespace icadyn {

// Argument outside the mathematical domain of an operation (|Q| > 1, rho out
// of range, q0 outside [0, 1], ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

// Invalid or inconsistent run configuration. Raised before any compute.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Integrator blow-up, NaN, singular effective potential, boundary leak.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// ||x~|| = 0 in the online update; the trial cannot continue.
class DegenerateStateError : public NumericError {
public:
  using NumericError::NumericError;
};

// Explicit Fokker-Planck step requested with dt above the stability bound.
class StepSizeError : public NumericError {
public:
  StepSizeError(const std::string& what, double max_dt)
      : NumericError(what), max_dt_(max_dt) {}
  double max_dt() const noexcept { return max_dt_; }

private:
  double max_dt_;
};

}  // namespace icadyn
