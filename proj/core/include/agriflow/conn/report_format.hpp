#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "agriflow/conn/connector.hpp"

namespace agriflow::conn {

inline constexpr const char* kReportMagic = "AGRIREPORT 1";

/// Parses a report file for `kind`. The declared fields must be exactly the
/// kind's output schema and each must carry one value of its type.
/// Throws Error(kValidation) with "line N: ..." details.
VariableMap parse_report(std::string_view text, const ConnectorDescriptor& kind);

/// A well-formed report for `kind` with the given values.
std::string write_report(const ConnectorDescriptor& kind, const VariableMap& values);

}  // namespace agriflow::conn
