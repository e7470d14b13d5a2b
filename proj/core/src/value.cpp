#include "agriflow/value.hpp"

#include <charconv>
#include <cmath>

#include "agriflow/error.hpp"

namespace agriflow {

ValueType type_of(const Value& v) noexcept {
  switch (v.index()) {
    case 0: return ValueType::kBoolean;
    case 1: return ValueType::kInteger;
    case 2: return ValueType::kDecimal;
    case 3: return ValueType::kText;
    default: return ValueType::kDocument;
  }
}

const char* to_string(ValueType t) noexcept {
  switch (t) {
    case ValueType::kBoolean: return "boolean";
    case ValueType::kInteger: return "integer";
    case ValueType::kDecimal: return "decimal";
    case ValueType::kText: return "text";
    case ValueType::kDocument: return "document";
  }
  return "text";
}

std::optional<ValueType> parse_value_type(std::string_view name) noexcept {
  if (name == "boolean") return ValueType::kBoolean;
  if (name == "integer") return ValueType::kInteger;
  if (name == "decimal") return ValueType::kDecimal;
  if (name == "text") return ValueType::kText;
  if (name == "document") return ValueType::kDocument;
  return std::nullopt;
}

bool conforms(const Value& v, ValueType expected) noexcept {
  const ValueType actual = type_of(v);
  return actual == expected || (expected == ValueType::kDecimal && actual == ValueType::kInteger);
}

namespace {

std::optional<std::int64_t> parse_int(std::string_view text) {
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return out;
}

std::optional<double> parse_double(std::string_view text) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(out)) return std::nullopt;
  return out;
}

}  // namespace

Value parse_value(ValueType type, std::string_view text) {
  auto bad = [&]() {
    return Error(ErrorCode::kInvalidArgument,
                 "cannot parse '" + std::string(text) + "' as " + to_string(type));
  };
  switch (type) {
    case ValueType::kBoolean:
      if (text == "true") return true;
      if (text == "false") return false;
      throw bad();
    case ValueType::kInteger:
      if (auto i = parse_int(text)) return *i;
      throw bad();
    case ValueType::kDecimal:
      if (auto d = parse_double(text)) return *d;
      throw bad();
    case ValueType::kText:
      return std::string(text);
    case ValueType::kDocument:
      if (text.starts_with("sha256:") && text.size() == 7 + 64) return DocumentRef{std::string(text)};
      throw bad();
  }
  throw bad();
}

Value infer_value(std::string_view text) {
  if (text == "true") return true;
  if (text == "false") return false;
  if (auto i = parse_int(text)) return *i;
  if (auto d = parse_double(text)) return *d;
  if (text.starts_with("sha256:") && text.size() == 7 + 64) return DocumentRef{std::string(text)};
  return std::string(text);
}

std::string format_decimal(double d) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  std::string out(buf, ptr);
  if (out.find_first_of(".eEn") == std::string::npos) out += ".0";
  return out;
}

std::string display(const Value& v) {
  struct Visitor {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_decimal(d); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const DocumentRef& r) const { return r.id; }
  };
  return std::visit(Visitor{}, v);
}

nlohmann::json to_json(const Value& v) {
  struct Visitor {
    nlohmann::json operator()(bool b) const { return b; }
    nlohmann::json operator()(std::int64_t i) const { return i; }
    nlohmann::json operator()(double d) const { return d; }
    nlohmann::json operator()(const std::string& s) const { return s; }
    nlohmann::json operator()(const DocumentRef& r) const { return nlohmann::json{{"doc", r.id}}; }
  };
  return std::visit(Visitor{}, v);
}

Value value_from_json(const nlohmann::json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object() && j.size() == 1 && j.contains("doc") && j["doc"].is_string()) {
    return DocumentRef{j["doc"].get<std::string>()};
  }
  throw Error(ErrorCode::kInvalidArgument, "unsupported variable value: " + j.dump());
}

nlohmann::json to_json(const VariableMap& vars) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, value] : vars) out[name] = to_json(value);
  return out;
}

VariableMap variables_from_json(const nlohmann::json& j) {
  if (j.is_null()) return {};
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "variables must be a JSON object");
  VariableMap out;
  for (const auto& [name, value] : j.items()) {
    if (name.empty()) throw Error(ErrorCode::kInvalidArgument, "variable names must be non-empty");
    out.emplace(name, value_from_json(value));
  }
  return out;
}

}  // namespace agriflow
