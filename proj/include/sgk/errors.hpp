#pragma once

#include <stdexcept>
#include <string>

namespace sgk {

// Index or level outside the supported range.
class BoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Argument outside the mathematical domain of an operation
// (boundary site where an interior site is required, disconnected pair, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller violated a documented precondition.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid numeric parameter (time step, rates, level too large for the rate scale).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or incomplete user configuration (rate tables, experiment files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rate family failed validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Test function or trajectory outside the admissible class of an operation.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Numerical solution left its invariant region.
class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sgk
