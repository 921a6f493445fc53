#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ligm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state or metric left the model's admissible set. Always a hard stop.
class InadmissibleState : public Error {
 public:
  using Error::Error;
};

/// Flux Jacobian has non-real eigenvalues at the given state.
class NonHyperbolic : public Error {
 public:
  using Error::Error;
};

class RiemannError : public Error {
 public:
  enum class Kind { kNoIntersection, kNonConvergence };
  RiemannError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// A wave left the interval it was supposed to stay inside.
class CflViolation : public Error {
 public:
  using Error::Error;
};

/// Semantically invalid configuration; `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Persisted data could not be read back.
class FormatError : public Error {
 public:
  enum class Kind { kCorrupt, kMeshMismatch, kVersionMismatch };
  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// The residual quadrature cannot be carried out on the given trajectory.
class CoverageError : public Error {
 public:
  using Error::Error;
};

}  // namespace ligm
