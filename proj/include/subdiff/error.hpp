#pragma once

#include <stdexcept>
#include <string>

namespace subdiff {

/// Bad input to a library call (sizes, orders, mismatched spaces).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Diffusion coefficient violated its declared ellipticity bounds.
class CoefficientInvalid : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solve failed where failure is not expected.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Special function requested outside its supported range.
class UnsupportedArgument : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Noise was requested for an identically zero observation.
class DegenerateObservation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace subdiff
