#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agglo {

enum class ErrorKind {
  invalid_spec,
  invalid_input,
  invalid_params,
  empty_mask,
  corrupt_mask,
  no_descent,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::invalid_params: return "invalid-params";
    case ErrorKind::empty_mask: return "empty-mask";
    case ErrorKind::corrupt_mask: return "corrupt-mask";
    case ErrorKind::no_descent: return "no-descent";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so the CLI can map it
// to a machine-readable error document.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string path = {})
      : std::runtime_error(message), kind_(kind), path_(std::move(path)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // JSON pointer or file path the error refers to, if any.
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorKind kind_;
  std::string path_;
};

}  // namespace agglo
