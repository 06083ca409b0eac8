#pragma once

#include <stdexcept>
#include <string>

namespace rawsat {

// Exit-code mapping used by the CLI: ConfigError -> 2, DataError -> 3,
// anything else -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing file content (band files, weight files, PNGs).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Well-formed input that violates a declared shape or invariant.
class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace rawsat
