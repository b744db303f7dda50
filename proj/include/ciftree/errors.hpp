#pragma once

#include <stdexcept>
#include <string>

namespace ciftree {

// Input problems (bad files, bad flags, bad parameters) derive from
// ValidationError; the CLI maps them to exit code 1. EstimationError covers
// numerical situations where a quantity cannot be computed (exit code 2).

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SchemaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParameterError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ciftree
