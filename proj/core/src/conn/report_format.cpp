#include "agriflow/conn/report_format.hpp"

#include <algorithm>
#include <map>

#include "agriflow/error.hpp"

namespace agriflow::conn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

}  // namespace

VariableMap parse_report(std::string_view text, const ConnectorDescriptor& kind) {
  std::vector<std::string> problems;
  auto at = [&](std::size_t line, const std::string& msg) { problems.push_back("line " + std::to_string(line) + ": " + msg); };
  const auto lines = split(text, '\n');

  if (lines.empty() || trim(lines[0]) != kReportMagic) {
    throw Error(ErrorCode::kValidation, "not a report file", {"line 1: expected '" + std::string(kReportMagic) + "'"});
  }

  std::optional<std::string> declared_kind;
  std::map<std::string, ValueType> declared;  // from the fields header
  std::size_t fields_line = 0;
  std::map<std::string, std::size_t> seen;
  VariableMap values;

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    const std::string_view line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    const std::size_t colon = line.find(':');
    if (eq == std::string_view::npos && colon != std::string_view::npos) {
      const std::string key(trim(line.substr(0, colon)));
      const std::string_view rest = trim(line.substr(colon + 1));
      if (key == "kind") {
        declared_kind = std::string(rest);
      } else if (key == "fields") {
        fields_line = ln;
        for (std::string_view item : split(rest, ',')) {
          item = trim(item);
          const std::size_t c = item.find(':');
          if (c == std::string_view::npos) {
            at(ln, "field declaration '" + std::string(item) + "' needs name:type");
            continue;
          }
          const std::string name(trim(item.substr(0, c)));
          const auto type = parse_value_type(trim(item.substr(c + 1)));
          if (!type) {
            at(ln, "field '" + name + "' has unknown type '" + std::string(trim(item.substr(c + 1))) + "'");
            continue;
          }
          if (!declared.emplace(name, *type).second) at(ln, "field '" + name + "' declared twice");
        }
      } else {
        at(ln, "unknown header '" + key + "'");
      }
      continue;
    }
    if (eq == std::string_view::npos) {
      at(ln, "expected 'name = value'");
      continue;
    }
    const std::string name(trim(line.substr(0, eq)));
    const std::string_view raw = trim(line.substr(eq + 1));
    if (fields_line == 0) {
      at(ln, "value '" + name + "' appears before the fields header");
      continue;
    }
    auto d = declared.find(name);
    if (d == declared.end()) {
      at(ln, "field '" + name + "' is not declared");
      continue;
    }
    if (auto prev = seen.find(name); prev != seen.end()) {
      at(ln, "field '" + name + "' already given on line " + std::to_string(prev->second));
      continue;
    }
    seen.emplace(name, ln);
    try {
      values[name] = parse_value(d->second, raw);
    } catch (const Error& e) {
      at(ln, "field '" + name + "': " + e.what());
    }
  }

  if (!declared_kind) {
    problems.push_back("header 'kind' is missing");
  } else if (*declared_kind != kind.kind) {
    problems.push_back("report is for '" + *declared_kind + "', expected '" + kind.kind + "'");
  }
  if (fields_line == 0) problems.push_back("header 'fields' is missing");
  for (const auto& p : kind.outputs) {
    auto d = declared.find(p.name);
    if (d == declared.end()) {
      if (fields_line) at(fields_line, "field '" + p.name + "' must be declared");
    } else if (d->second != p.type && !(p.type == ValueType::kDecimal && d->second == ValueType::kInteger)) {
      at(fields_line, "field '" + p.name + "' must be declared " + to_string(p.type));
    } else if (!seen.count(p.name)) {
      problems.push_back("field '" + p.name + "' has no value");
    }
  }
  for (const auto& [name, type] : declared) {
    const bool known = std::any_of(kind.outputs.begin(), kind.outputs.end(), [&](const Param& p) { return p.name == name; });
    if (!known) at(fields_line, "field '" + name + "' is not part of " + kind.kind);
  }
  if (!problems.empty()) throw Error(ErrorCode::kValidation, "invalid " + kind.kind + " report", problems);
  for (const auto& p : kind.outputs) {
    Value& v = values.at(p.name);
    if (p.type == ValueType::kDecimal && std::holds_alternative<std::int64_t>(v)) {
      v = static_cast<double>(std::get<std::int64_t>(v));
    }
  }
  return values;
}

std::string write_report(const ConnectorDescriptor& kind, const VariableMap& values) {
  std::string out = std::string(kReportMagic) + "\nkind: " + kind.kind + "\nfields: ";
  for (std::size_t i = 0; i < kind.outputs.size(); ++i) {
    out += (i ? ", " : "") + kind.outputs[i].name + ":" + to_string(kind.outputs[i].type);
  }
  out += "\n";
  for (const auto& p : kind.outputs) {
    auto it = values.find(p.name);
    if (it == values.end()) throw Error(ErrorCode::kInvalidArgument, "no value for report field '" + p.name + "'");
    const std::string text = display(it->second);
    if (text.find('\n') != std::string::npos) {
      throw Error(ErrorCode::kInvalidArgument, "report field '" + p.name + "' must be a single line");
    }
    out += p.name + " = " + text + "\n";
  }
  return out;
}

}  // namespace agriflow::conn
