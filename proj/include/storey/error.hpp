#pragma once

#include <stdexcept>
#include <string>

namespace storey {

enum class ErrorKind {
  Parse,          // malformed text (MAC, JSON)
  Schema,         // well-formed input that violates a file schema or invariant
  InvalidArgument,
  NoVisibleAps,
  Numerical,
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

// Library-wide sink for non-fatal diagnostics. Defaults to stderr.
using WarningHandler = void (*)(const std::string&);
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace storey
