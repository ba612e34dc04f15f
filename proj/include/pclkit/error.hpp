#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pclkit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a type invariant or an operation precondition.
/// The CLI maps this to exit status 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A malformed record in a line-oriented file.
class ParseError : public ValidationError {
 public:
  ParseError(std::string path, std::size_t line, const std::string& reason)
      : ValidationError(path + ":" + std::to_string(line) + ": " + reason),
        path_(std::move(path)),
        line_(line) {}

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

/// Filesystem, network or other environment failure. CLI exit status 2.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A statistic that has no defined value for the given input
/// (e.g. Cohen's kappa when chance agreement is 1).
class UndefinedResult : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace pclkit
