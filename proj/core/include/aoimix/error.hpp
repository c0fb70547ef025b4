#pragma once

#include <stdexcept>
#include <string>

namespace aoimix {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulated process or estimate left the finite range.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical routine ran out of budget.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition (shape mismatch, missing value).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace aoimix
