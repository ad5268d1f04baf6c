#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hypernoise {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Raised when (I + J) or another factorized matrix is singular to machine precision.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// A mathematical precondition does not hold (e.g. L >= 1 for the log-det bound).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong state, e.g. backward before forward.
class StateError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf. `index()` identifies the offending sample or probe.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// CSV input that does not have the columns (or rows) a consumer needs.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace hypernoise
