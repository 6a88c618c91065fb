#pragma once

#include <stdexcept>
#include <string>

namespace caliblab {

// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument: out-of-range value, malformed input, depth mismatch.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Observed outcome has zero probability under the distribution.
class InconsistencyError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

// Exhaustive computation exceeds a configured cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// An internal invariant was breached (a bug, not bad input).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace caliblab
