#pragma once

#include <stdexcept>
#include <string>

namespace semfill {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, int line = -1, int column = -1)
      : Error(line >= 0 ? "line " + std::to_string(line) + ", column " +
                              std::to_string(column) + ": " + message
                        : message),
        line_(line),
        column_(column) {}

  /// 1-based line in the config file, or -1 when not tied to a location.
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointIntegrityError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Raised by the training loop when a loss term stops being finite.
class NonFiniteLossError : public Error {
 public:
  explicit NonFiniteLossError(std::string term)
      : Error("non-finite loss term: " + term), term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace semfill
