#pragma once

#include <stdexcept>
#include <string>

namespace amclip {

/// Base of all library errors. `kind()` groups them for exit-code mapping.
class Error : public std::runtime_error {
 public:
  enum class Kind { Config, Data, Numeric };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Bad arguments, infeasible sampling plans, bad configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::Config, what) {}
};

class ArgumentError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class InfeasiblePlanError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Malformed or inconsistent input files.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Kind::Data, what) {}
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

class IngestionError : public DataError {
 public:
  using DataError::DataError;
};

class CacheCorruptionError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class EvaluationError : public DataError {
 public:
  using DataError::DataError;
};

/// Non-finite values, zero-norm embeddings.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(Kind::Numeric, what) {}
};

}  // namespace amclip
