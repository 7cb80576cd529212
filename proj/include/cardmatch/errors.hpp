#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cardmatch {

// Base for every error the library raises. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class MissingValueError : public Error {
 public:
  MissingValueError(std::size_t row, std::string column)
      : Error("missing or non-numeric value at row " + std::to_string(row) +
              ", column '" + column + "'"),
        row(row),
        column(std::move(column)) {}
  std::size_t row;
  std::string column;
};

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(std::string id)
      : Error("duplicate unit id '" + id + "'"), id(std::move(id)) {}
  std::string id;
};

class UnknownColumnError : public Error {
 public:
  explicit UnknownColumnError(std::string name)
      : Error("unknown column '" + name + "'"), name(std::move(name)) {}
  std::string name;
};

class ConstantCovariateError : public Error {
 public:
  explicit ConstantCovariateError(std::string name)
      : Error("covariate '" + name + "' is constant (pooled SD is zero)"),
        name(std::move(name)) {}
  std::string name;
};

class NonBinaryExposureError : public Error {
 public:
  explicit NonBinaryExposureError(std::size_t row)
      : Error("exposure column must be 0 or 1 at row " + std::to_string(row)),
        row(row) {}
  std::size_t row;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, const std::string& detail)
      : Error("config syntax error at line " + std::to_string(line) + ": " +
              detail),
        line(line) {}
  std::size_t line;
};

class UnknownKeyError : public Error {
 public:
  explicit UnknownKeyError(std::string path)
      : Error("unknown config key '" + path + "'"), path(std::move(path)) {}
  std::string path;
};

class InvalidToleranceError : public Error {
 public:
  explicit InvalidToleranceError(std::string name)
      : Error("invalid tolerance for '" + name + "' (must be >= 0 and finite)"),
        name(std::move(name)) {}
  std::string name;
};

class MissingTargetMeanError : public Error {
 public:
  explicit MissingTargetMeanError(std::string name)
      : Error("target profile has no mean for balance covariate '" + name +
              "'"),
        name(std::move(name)) {}
  std::string name;
};

class EmptyProblemError : public Error {
 public:
  EmptyProblemError()
      : Error("no stratum has both treated and control units; nothing can be "
              "matched") {}
};

class TooLargeError : public Error {
 public:
  explicit TooLargeError(std::size_t n_units)
      : Error("enumeration oracle limited to 26 units, got " +
              std::to_string(n_units)) {}
};

class UnbalancedStratumError : public Error {
 public:
  UnbalancedStratumError(std::string label, std::size_t n_treated,
                         std::size_t n_controls)
      : Error("stratum '" + label + "' selects " + std::to_string(n_treated) +
              " treated but " + std::to_string(n_controls) +
              " controls; 1:1 pairing is impossible"),
        label(std::move(label)) {}
  std::string label;
};

class InvalidConfigError : public Error {
 public:
  explicit InvalidConfigError(const std::string& detail)
      : Error("invalid config: " + detail) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& detail) : Error("io error: " + detail) {}
};

}  // namespace cardmatch
