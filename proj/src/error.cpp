#include "storey/error.hpp"

#include <atomic>
#include <iostream>

namespace storey {

namespace {

void stderr_handler(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::atomic<WarningHandler> g_handler{&stderr_handler};

}  // namespace

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::NoVisibleAps: return "no-visible-aps";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

void set_warning_handler(WarningHandler handler) { g_handler.store(handler ? handler : &stderr_handler); }

void warn(const std::string& message) { g_handler.load()(message); }

}  // namespace storey
