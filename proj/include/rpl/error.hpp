#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rpl {

enum class ErrorKind {
  InvalidArgument,
  Malformed,
  Config,
  Io,
  Numeric,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid_argument";
    case ErrorKind::Malformed: return "malformed_input";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numeric: return "numeric";
  }
  return "unknown";
}

// All library failures are reported through this type so the CLI can map
// them onto a stable one-line diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace rpl
