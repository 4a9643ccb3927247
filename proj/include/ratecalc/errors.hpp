#pragma once

#include <stdexcept>
#include <string>

namespace ratecalc {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kMathDomain = 3,
  kConditionFailure = 4,
  kCap = 5,
  kSolver = 6,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

// Malformed configuration, grids or user input.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfig; }
};

// Bad input data (duplicate abscissae, empty tables, size limits).
class InputError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DomainError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kMathDomain; }
};

class FitError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Spectral gap numerically zero (disconnected weight graph).
class SingularityError : public DomainError {
 public:
  using DomainError::DomainError;
};

// A side condition of a transform failed or could not be established.
class ConditionError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override {
    return ExitCode::kConditionFailure;
  }
};

class PreconditionError : public ConditionError {
 public:
  using ConditionError::ConditionError;
};

// An index search hit k_max or N_max.
class CapError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kCap; }
};

class SolverError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kSolver; }
};

}  // namespace ratecalc
