#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace voxstream {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kEmptyInput,
  kOutOfRange,
  kTemplateViolation,
  kOverSubscribed,
  kInvalidState,
  kIo,
  kParse,
};

std::string_view to_string(ErrorCode code);

// Structured library error. `details` carries machine-readable context
// (expected/actual dims, offending positions, allocations...) so the CLI
// can forward it verbatim as JSON.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, nlohmann::json details = nlohmann::json::object());

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& details() const noexcept { return details_; }

  // {"error": <code>, "message": ..., "details": {...}}
  nlohmann::json to_json() const;

 private:
  ErrorCode code_;
  nlohmann::json details_;
};

}  // namespace voxstream
