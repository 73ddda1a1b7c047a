#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aetransfer {

/// Failure classes. The CLI maps them onto exit codes 2, 3 and 4.
enum class ErrorKind { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message) : Error(ErrorKind::numerical, message) {}
};

/// Re-raises `e` with `stage` prepended, keeping its kind.
[[noreturn]] inline void rethrow_with_stage(const Error& e, std::string_view stage) {
  throw Error(e.kind(), std::string(stage) + ": " + e.what());
}

}  // namespace aetransfer
