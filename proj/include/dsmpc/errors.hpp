#pragma once

#include <stdexcept>
#include <string>

namespace dsmpc {

/// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operands have inconsistent shapes. Reported before any numerical check.
struct DimensionMismatch : Error {
  using Error::Error;
};

/// A linear solve met a pivot below the singularity threshold.
struct SingularMatrix : Error {
  using Error::Error;
};

/// Cholesky factorization met a non-positive diagonal pivot.
struct NotPositiveDefinite : Error {
  using Error::Error;
};

/// An iterative method hit its iteration cap before reaching tolerance.
struct NonConvergence : Error {
  using Error::Error;
};

/// A Kronecker lift would exceed the configured dense-dimension cap.
struct DimensionOverflow : Error {
  using Error::Error;
};

/// The Kronecker system of a Lyapunov equation is singular, or the
/// computed solution does not satisfy the equation to tolerance.
struct LyapunovFailure : Error {
  using Error::Error;
};

/// The Riccati fixed-point iteration failed to converge or the resulting
/// closed loop is not stable.
struct RiccatiNonConvergence : Error {
  using Error::Error;
};

/// No input sequence satisfies the risk constraint at the current budget:
/// inf_m c(m) > eps. Carries the infimum so callers can report the
/// smallest budget that would have been feasible.
struct Infeasible : Error {
  Infeasible(const std::string& what, double min_value)
      : Error(what), min_constraint_value(min_value) {}
  double min_constraint_value;
};

/// A closed-loop update was requested before any controller solve.
struct MissingPreviousSolution : Error {
  using Error::Error;
};

/// A controller solve failed mid-simulation. Wraps the underlying error
/// together with the step index and state at which it occurred.
struct SolverFailure : Error {
  using Error::Error;
};

/// A model file could not be parsed against the expected schema.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace dsmpc
