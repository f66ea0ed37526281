#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace proofgrade {

// Coarse error categories. The CLI maps each one to a distinct exit code and
// the HTTP layer maps them to status classes.
enum class ErrorKind {
  Input,       // caller supplied something invalid
  Format,      // a file did not conform to its format
  Config,      // configuration parse or validation failure
  Provider,    // embedding provider failure
  Training,    // optimisation diverged or could not run
  Statistics,  // a statistic is undefined for the given data
  NotFound,
  Conflict,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by embedding providers. `unavailable` marks transport-level outages
// (the server answers 503 for those); `http_status` is 0 when no response
// was received.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& message, int http_status = 0,
                bool unavailable = false)
      : Error(ErrorKind::Provider, message),
        http_status_(http_status),
        unavailable_(unavailable) {}

  int http_status() const noexcept { return http_status_; }
  bool unavailable() const noexcept { return unavailable_; }

 private:
  int http_status_;
  bool unavailable_;
};

}  // namespace proofgrade
