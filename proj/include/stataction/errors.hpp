#pragma once

#include <stdexcept>
#include <string>

namespace stataction {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Inertia matrix is not symmetric, not positive definite, or not invertible.
class InvalidInertia : public Error {
 public:
  using Error::Error;
};

/// A quadrature or finite-difference routine was handed too few nodes.
class GridTooCoarse : public Error {
 public:
  using Error::Error;
};

/// Two grids that must be aligned (trajectory/flow, control/horizon) are not.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed problem definition or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace stataction
