#pragma once

#include <stdexcept>
#include <string>

namespace qrlab {

/// Root of the library's error hierarchy. Every failure the library reports
/// derives from this, so callers (the CLI in particular) can map error kinds
/// onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad shape, out of range).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The request is well formed but too large for the configured limits.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// An iterative or factorization routine failed to reach its tolerance.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// A modelling assumption needed by an asymptotic formula does not hold.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

/// K + lambda I is not positive definite within tolerance.
class SingularSystem : public NumericalFailure {
 public:
  SingularSystem(const std::string& what, double lambda_min_estimate)
      : NumericalFailure(what), lambda_min_(lambda_min_estimate) {}
  double lambda_min_estimate() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

}  // namespace qrlab
