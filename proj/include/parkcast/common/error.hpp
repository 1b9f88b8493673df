#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace parkcast {

// Base of every error raised by the library. The CLI maps the subclasses onto
// exit codes: input problems (parse, schema, validation, fingerprint) exit 3,
// everything else exits 4.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Input rejected before or while it was interpreted.
class InputError : public Error {
public:
  using Error::Error;
};

class ParseError : public InputError {
public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : InputError(what + " (at byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}

  std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
  std::size_t byte_offset_;
};

class SchemaError : public InputError {
public:
  using InputError::InputError;
};

struct Violation {
  std::string field;
  std::string rule;
  std::string message;
};

class ValidationError : public InputError {
public:
  explicit ValidationError(std::vector<Violation> violations);

  const std::vector<Violation>& violations() const noexcept { return violations_; }

private:
  std::vector<Violation> violations_;
};

class FingerprintMismatch : public InputError {
public:
  FingerprintMismatch(const std::string& what, std::string expected, std::string actual)
      : InputError(what + ": expected " + expected + ", actual " + actual),
        expected_(std::move(expected)),
        actual_(std::move(actual)) {}

  const std::string& expected() const noexcept { return expected_; }
  const std::string& actual() const noexcept { return actual_; }

private:
  std::string expected_;
  std::string actual_;
};

class ArgumentError : public Error {
public:
  using Error::Error;
};

class DomainError : public Error {
public:
  using Error::Error;
};

class LookupError : public Error {
public:
  using Error::Error;
};

class GeometryError : public Error {
public:
  using Error::Error;
};

class DegenerateGateError : public GeometryError {
public:
  using GeometryError::GeometryError;
};

class AmbiguityError : public Error {
public:
  AmbiguityError(const std::string& what, std::vector<int> ids);

  const std::vector<int>& ids() const noexcept { return ids_; }

private:
  std::vector<int> ids_;
};

// Undefined statistic, e.g. a correlation of a constant sequence.
class UndefinedError : public Error {
public:
  using Error::Error;
};

class RankError : public Error {
public:
  using Error::Error;
};

class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double max_violation)
      : Error(what + " (max violation " + std::to_string(max_violation) + ")"),
        max_violation_(max_violation) {}

  double max_violation() const noexcept { return max_violation_; }

private:
  double max_violation_;
};

class DivergenceError : public Error {
public:
  DivergenceError(const std::string& what, int epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

class SearchError : public Error {
public:
  using Error::Error;
};

}  // namespace parkcast
