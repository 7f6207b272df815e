#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hg {

// Machine-readable error codes shared by every module and surfaced on the
// wire as {"code": "...", "message": "..."}.
enum class ErrorCode {
  kValidation,
  kUnauthorized,
  kForbidden,
  kNotFound,
  kConflict,
  kBadFilter,
  kSchemaMismatch,
  kEmptyInput,
  kMixedInput,
  kInsufficientSteps,
  kInsufficientPose,
  kModelNotFound,
  kStaleLease,
  kCorrupt,
  kUnavailable,
  kInternal,
};

std::string_view to_string(ErrorCode code);

// HTTP status used when the error crosses the API boundary.
int http_status(ErrorCode code);

ErrorCode error_code_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hg
