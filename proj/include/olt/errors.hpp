#pragma once

#include <stdexcept>
#include <string>

namespace olt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rotation angle too close to pi for a well-conditioned SE(3) log.
class AngleNearPi : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// The tracking cost hit an ill-conditioned log map.
class CostSingularity : public Error {
 public:
  using Error::Error;
};

class BackwardPassFailure : public Error {
 public:
  using Error::Error;
};

class NonFiniteCost : public Error {
 public:
  using Error::Error;
};

class NotInitialized : public Error {
 public:
  using Error::Error;
};

class EmptySequence : public Error {
 public:
  using Error::Error;
};

class SolverDiverged : public Error {
 public:
  using Error::Error;
};

/// Frame buffer full; the pipeline logs it and drops the oldest frame.
class BufferOverflow : public Error {
 public:
  using Error::Error;
};

/// Malformed config text. Carries the offending line and field path.
class ParseError : public Error {
 public:
  ParseError(int line, std::string field, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + field + ": " + what),
        line_(line),
        field_(std::move(field)) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

/// A field is missing or violates a declared constraint.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& constraint)
      : Error(field + ": " + constraint), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace olt
