#pragma once

#include <stdexcept>
#include <string>

namespace sonic {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation (u <= 0, gamma <= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Parameters that are individually valid but jointly inconsistent.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Off-critical phase-plane data driven into the sonic singularity.
class SonicBlowup : public Error {
 public:
  using Error::Error;
};

/// Step-size underflow or step budget exhausted in an ODE integration.
class IntegratorFailure : public Error {
 public:
  using Error::Error;
};

/// Nonlinear or linear solver failed to reach its tolerance.
class SolverFailure : public Error {
 public:
  using Error::Error;
};

/// Queried feature is absent from the data (no sonic crossing, detached shock, ...).
class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace sonic
