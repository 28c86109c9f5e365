#pragma once

#include <stdexcept>
#include <string>

namespace driveid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument outside its admissible range (dilation < 1, p >= 1, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (schema violations, bad cells, too few windows).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or mismatched checkpoint / model / report files.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace driveid
