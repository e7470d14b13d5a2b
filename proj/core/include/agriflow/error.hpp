#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace agriflow {

enum class ErrorCode {
  kSyntax,
  kUnsupported,
  kValidation,
  kEvaluation,
  kNotFound,
  kUnauthenticated,
  kForbidden,
  kConflict,
  kStorage,
  kConnector,
  kInvalidArgument,
};

const char* to_string(ErrorCode code) noexcept;

// Every recoverable failure in the platform is an Error: a code the API layer
// maps to an HTTP status, a human message, and zero or more detail lines
// (one per violation when several are collected).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::vector<std::string> details = {});

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace agriflow
