#pragma once

#include <stdexcept>
#include <string>

namespace ditreuse {

// Base class for all library errors so callers can catch everything at once.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values (bad dimensions, unknown tap names, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Tensor shape mismatches.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Operation called on a state that cannot serve it (e.g. reuse before any
// computed step, FLOP report without both step kinds).
class InvalidStateError : public Error {
 public:
  using Error::Error;
};

// Bad arguments to a pure function (empty input, mismatched runs, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Correlation requested on a constant sequence.
class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

}  // namespace ditreuse
