#include "agriflow/error.hpp"

namespace agriflow {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kSyntax: return "syntax_error";
    case ErrorCode::kUnsupported: return "unsupported_element";
    case ErrorCode::kValidation: return "validation_error";
    case ErrorCode::kEvaluation: return "evaluation_error";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kUnauthenticated: return "unauthenticated";
    case ErrorCode::kForbidden: return "forbidden";
    case ErrorCode::kConflict: return "conflict";
    case ErrorCode::kStorage: return "storage_error";
    case ErrorCode::kConnector: return "connector_error";
    case ErrorCode::kInvalidArgument: return "invalid_argument";
  }
  return "unknown";
}

Error::Error(ErrorCode code, std::string message, std::vector<std::string> details)
    : std::runtime_error(std::move(message)), code_(code), details_(std::move(details)) {}

}  // namespace agriflow
