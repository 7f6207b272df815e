#include "hg/common/error.hpp"

#include <array>
#include <utility>

namespace hg {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 16> kNames{{
    {ErrorCode::kValidation, "VALIDATION"},
    {ErrorCode::kUnauthorized, "UNAUTHORIZED"},
    {ErrorCode::kForbidden, "FORBIDDEN"},
    {ErrorCode::kNotFound, "NOT_FOUND"},
    {ErrorCode::kConflict, "CONFLICT"},
    {ErrorCode::kBadFilter, "BAD_FILTER"},
    {ErrorCode::kSchemaMismatch, "SCHEMA_MISMATCH"},
    {ErrorCode::kEmptyInput, "EMPTY_INPUT"},
    {ErrorCode::kMixedInput, "MIXED_INPUT"},
    {ErrorCode::kInsufficientSteps, "INSUFFICIENT_STEPS"},
    {ErrorCode::kInsufficientPose, "INSUFFICIENT_POSE"},
    {ErrorCode::kModelNotFound, "MODEL_NOT_FOUND"},
    {ErrorCode::kStaleLease, "STALE_LEASE"},
    {ErrorCode::kCorrupt, "CORRUPT"},
    {ErrorCode::kUnavailable, "UNAVAILABLE"},
    {ErrorCode::kInternal, "INTERNAL"},
}};

}  // namespace

std::string_view to_string(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "INTERNAL";
}

ErrorCode error_code_from_string(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return ErrorCode::kInternal;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation:
    case ErrorCode::kBadFilter:
    case ErrorCode::kSchemaMismatch:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kMixedInput:
    case ErrorCode::kInsufficientSteps:
    case ErrorCode::kInsufficientPose:
      return 400;
    case ErrorCode::kUnauthorized:
      return 401;
    case ErrorCode::kForbidden:
      return 403;
    case ErrorCode::kNotFound:
    case ErrorCode::kModelNotFound:
      return 404;
    case ErrorCode::kConflict:
    case ErrorCode::kStaleLease:
      return 409;
    case ErrorCode::kUnavailable:
      return 503;
    case ErrorCode::kCorrupt:
    case ErrorCode::kInternal:
      return 500;
  }
  return 500;
}

}  // namespace hg
