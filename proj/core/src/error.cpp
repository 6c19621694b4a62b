#include "voxstream/error.hpp"

namespace voxstream {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kTemplateViolation: return "template_violation";
    case ErrorCode::kOverSubscribed: return "over_subscribed";
    case ErrorCode::kInvalidState: return "invalid_state";
    case ErrorCode::kIo: return "io_error";
    case ErrorCode::kParse: return "parse_error";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message, nlohmann::json details)
    : std::runtime_error(message), code_(code), details_(std::move(details)) {}

nlohmann::json Error::to_json() const {
  return {{"error", std::string(to_string(code_))}, {"message", what()}, {"details", details_}};
}

}  // namespace voxstream
