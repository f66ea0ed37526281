#include "proofgrade/error.hpp"

namespace proofgrade {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Input: return "input";
    case ErrorKind::Format: return "format";
    case ErrorKind::Config: return "config";
    case ErrorKind::Provider: return "provider";
    case ErrorKind::Training: return "training";
    case ErrorKind::Statistics: return "statistics";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::Conflict: return "conflict";
  }
  return "unknown";
}

}  // namespace proofgrade
