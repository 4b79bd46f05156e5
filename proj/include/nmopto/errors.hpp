#pragma once

#include <stdexcept>
#include <string>

namespace nmopto {

// Invalid input that violates an operation's precondition.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Integration blow-up, failed factorization, nonconvergence and similar.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fock-space truncation is too small for the populated levels.
class TruncationError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nmopto
