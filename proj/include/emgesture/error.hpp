#pragma once

#include <stdexcept>
#include <string>

namespace emg {

// Numeric values double as CLI exit codes.
enum class ErrorKind { usage = 2, data = 3, numeric = 4 };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage:
      return "usage";
    case ErrorKind::data:
      return "data";
    case ErrorKind::numeric:
      return "numeric";
  }
  return "unknown";
}

/// Library error. `code()` is a short stable identifier ("channel_count",
/// "bounds", ...) that callers and tests can match on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

[[noreturn]] inline void fail(ErrorKind kind, std::string code, const std::string& message) {
  throw Error(kind, std::move(code), message);
}

inline void require(bool condition, ErrorKind kind, const char* code, const std::string& message) {
  if (!condition) fail(kind, code, message);
}

}  // namespace emg
