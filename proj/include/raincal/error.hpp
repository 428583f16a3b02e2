#pragma once

#include <stdexcept>
#include <string>

namespace raincal {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV rows, schema, missing columns).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Parameters or arguments outside the documented domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A moment system or root-finding problem without a solution in the search box.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Quadrature or iteration failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid pipeline configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace raincal
