#include "inkline/error.hpp"

namespace inkline {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidImage: return "invalid-image";
    case ErrorKind::WidthExceedsTarget: return "width-exceeds-target";
    case ErrorKind::ManifestError: return "manifest-error";
    case ErrorKind::EncodingError: return "encoding-error";
    case ErrorKind::AlignmentError: return "alignment-error";
    case ErrorKind::ContractViolation: return "contract-violation";
    case ErrorKind::ConfigError: return "config-error";
    case ErrorKind::IoError: return "io-error";
    case ErrorKind::LoadError: return "load-error";
    case ErrorKind::NonFiniteLoss: return "non-finite-loss";
    case ErrorKind::UndefinedRate: return "undefined-rate";
    case ErrorKind::InsufficientData: return "insufficient-data";
  }
  return "unknown";
}

}  // namespace inkline
