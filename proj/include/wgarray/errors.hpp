#pragma once

#include <stdexcept>
#include <string>

namespace wgarray {

/// A parameter set or configuration value is outside its documented range.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A moment state or covariance matrix violates a structural invariant
/// (Hermiticity, physicality, ...). Usually means upstream corruption.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or loss of symplecticity during integration.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wgarray
