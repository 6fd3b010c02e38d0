#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace inkline {

enum class ErrorKind {
  InvalidImage,
  WidthExceedsTarget,
  ManifestError,
  EncodingError,
  AlignmentError,
  ContractViolation,
  ConfigError,
  IoError,
  LoadError,
  NonFiniteLoss,
  UndefinedRate,
  InsufficientData,
};

std::string_view to_string(ErrorKind kind);

// All library failures surface as this type; the kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) {
    throw Error(kind, message);
  }
}

}  // namespace inkline
