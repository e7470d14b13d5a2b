#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

namespace agriflow {

/// Content-addressed reference to an ingested document ("sha256:<hex>").
struct DocumentRef {
  std::string id;
  friend bool operator==(const DocumentRef&, const DocumentRef&) = default;
};

using Value = std::variant<bool, std::int64_t, double, std::string, DocumentRef>;

enum class ValueType { kBoolean, kInteger, kDecimal, kText, kDocument };

/// Process variables. Ordered so that serialization is canonical.
using VariableMap = std::map<std::string, Value, std::less<>>;

ValueType type_of(const Value& v) noexcept;
const char* to_string(ValueType t) noexcept;
std::optional<ValueType> parse_value_type(std::string_view name) noexcept;

/// True when `v` is acceptable where `expected` is declared. Integers are
/// accepted for decimal slots; nothing else converts implicitly.
bool conforms(const Value& v, ValueType expected) noexcept;

/// Parses `text` as a value of the given type (CLI fields, report files).
/// Throws Error(kInvalidArgument) on malformed input.
Value parse_value(ValueType type, std::string_view text);

/// Best-effort typing of a bare string: true/false, integer, decimal, else text.
Value infer_value(std::string_view text);

std::string display(const Value& v);

nlohmann::json to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);
nlohmann::json to_json(const VariableMap& vars);
VariableMap variables_from_json(const nlohmann::json& j);

/// Shortest round-trip decimal text that always carries a '.' or exponent.
std::string format_decimal(double d);

}  // namespace agriflow
