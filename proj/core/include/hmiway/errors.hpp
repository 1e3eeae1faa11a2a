#pragma once

#include <stdexcept>
#include <string>

namespace hmiway {

// Base type for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition or API contract (e.g. step() after the episode ended).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration. Carries source name and 1-based line (0 = no line).
class ConfigError : public Error {
 public:
  ConfigError(std::string source, int line, const std::string& message)
      : Error(format(source, line, message)), source_(std::move(source)), line_(line) {}

  const std::string& source() const { return source_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& source, int line, const std::string& message) {
    if (line > 0) return source + ":" + std::to_string(line) + ": " + message;
    return source + ": " + message;
  }

  std::string source_;
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class DatasetErrorKind { kVersionMismatch, kTruncated, kSchema };

class DatasetError : public Error {
 public:
  DatasetError(DatasetErrorKind kind, const std::string& message) : Error(message), kind_(kind) {}
  DatasetErrorKind kind() const { return kind_; }

 private:
  DatasetErrorKind kind_;
};

}  // namespace hmiway
