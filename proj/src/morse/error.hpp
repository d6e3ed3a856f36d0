#pragma once

#include <stdexcept>
#include <string>

namespace morse {

/// Coarse error category. Each maps onto one C API status code and one CLI
/// exit code.
enum class ErrorKind {
  Usage,       // bad arguments or configuration
  Io,          // file cannot be opened, read or written
  Format,      // malformed file contents
  Validation,  // input violates a documented precondition
  Divergence,  // training produced a non-finite loss
};

/// Exception carrying a category plus a short machine-readable code such as
/// "TooShort" or "SchemaMismatch".
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

}  // namespace morse
