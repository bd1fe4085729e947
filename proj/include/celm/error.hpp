#pragma once

#include <stdexcept>
#include <string>

namespace celm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller misuse: mismatched dimensions, malformed arguments.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Bad input data: non-finite values, unknown labels, unreadable CSV.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Data that is well-formed but cannot produce a valid hidden node
/// (e.g. every drawn pair coincides).
class DegenerateDataError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid configuration: non-positive lambda, unknown strategy, too few classes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible serialized model.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Requested problem size exceeds the memory budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace celm
