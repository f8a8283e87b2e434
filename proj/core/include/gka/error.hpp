#pragma once

#include <stdexcept>
#include <string>

namespace gka {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration, group spec, or usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed factorizations, non-convergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gka
