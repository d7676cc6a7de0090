#pragma once

#include <stdexcept>
#include <string>

namespace celt {

/// Base of every error the library throws. Callers that only need a
/// category (for exit codes) can catch the three direct subclasses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a documented contract or schema.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures: unreadable or unwritable paths, short reads.
class IoError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IndexError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ContractError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace celt
