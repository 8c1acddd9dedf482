#pragma once

#include <stdexcept>
#include <string>

namespace pickands {

// Root of the library's error hierarchy. Configuration problems (bad
// parameters, impossible grids) and numerical failures (non-PSD inputs,
// detected divergence, invalid kernels) are separated so callers can map
// them to distinct process exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration: bad parameter ranges, malformed spec
// strings, inconsistent regime combinations.
struct ConfigError : Error {
  using Error::Error;
};

// Requested grid would exceed the hard point-count cap.
struct GridTooLargeError : ConfigError {
  using ConfigError::ConfigError;
};

// A computation started but cannot produce a trustworthy number.
struct NumericalError : Error {
  using Error::Error;
};

// Circulant embedding produced eigenvalues below the clip tolerance.
struct EmbeddingNotPsdError : NumericalError {
  using NumericalError::NumericalError;
};

// Dense covariance matrix is not positive semidefinite within jitter budget.
struct NotPsdError : NumericalError {
  using NumericalError::NumericalError;
};

// A Monte Carlo mean shows no sign of stabilising: either the windowed
// running estimate keeps growing as the window is doubled, or the lattice
// denominator vanishes on a shifted copy while the numerator does not.
struct DivergenceSuspectedError : NumericalError {
  using NumericalError::NumericalError;
};

// Kernel violates a structural requirement (unit mass, positivity of the
// lattice sum on the quotient cell, parseability of a tabulated shape).
struct InvalidKernelError : NumericalError {
  using NumericalError::NumericalError;
};

// Integral tail mass outside the admissible integration box exceeds the
// requested tolerance.
struct NonIntegrableError : NumericalError {
  using NumericalError::NumericalError;
};

// A variance family fails its structural checks (continuity in the family
// parameter, growth-exponent bounds).
struct FamilyInvalidError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace pickands
