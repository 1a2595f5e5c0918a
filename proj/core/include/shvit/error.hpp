#pragma once

#include <stdexcept>
#include <string>

namespace shvit {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not agree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or consumed by a numeric operation, or a divergent loss.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Autograd misuse: detached or non-scalar loss, double backward.
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing input data (images, filenames, checkpoints, splits).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace shvit
