#pragma once

#include <stdexcept>
#include <string>

namespace csgp {

/// Base class for all csgp errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// A grid cell is missing or duplicated in an ingested dataset.
struct IncompleteGrid : Error {
  using Error::Error;
};

struct NonNumeric : Error {
  using Error::Error;
};

struct EmptyFile : Error {
  using Error::Error;
};

/// A train/test split left one side empty.
struct DegenerateSplit : Error {
  using Error::Error;
};

/// A dense-mode operation was requested above the configured size cap.
struct SizeCap : Error {
  using Error::Error;
};

/// A symmetric factorization failed (matrix not positive definite).
struct NotPsd : Error {
  using Error::Error;
};

/// A log determinant was requested for a spectrum containing zero
/// eigenvalues with zero noise.
struct NonPositive : Error {
  using Error::Error;
};

/// Input data is unusable (e.g. zero-variance responses).
struct DegenerateData : Error {
  using Error::Error;
};

/// No grid line has enough masked points to form a spectrum.
struct EmptyRegime : Error {
  using Error::Error;
};

struct DegenerateDenominator : Error {
  using Error::Error;
};

}  // namespace csgp
