#pragma once

#include <stdexcept>
#include <string>

namespace fdi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix or system dimensions, or malformed input data.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numerical operation could not produce a trustworthy result
/// (near-singular resolvent, no stabilizing Riccati solution, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The requested diagnosis problem has no solution: a rank condition fails
/// or the nullspace is empty.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace fdi
