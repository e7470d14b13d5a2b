#include "agriflow/conn/connector.hpp"

#include <algorithm>

#include "agriflow/error.hpp"

namespace agriflow::conn {

const char* to_string(Mode m) noexcept { return m == Mode::kApiCall ? "api_call" : "file_upload"; }

nlohmann::json to_json(const ConnectorDescriptor& d) {
  auto params = [](const std::vector<Param>& ps) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : ps) out.push_back({{"name", p.name}, {"type", to_string(p.type)}});
    return out;
  };
  return {{"kind", d.kind}, {"mode", to_string(d.mode)}, {"title", d.title}, {"inputs", params(d.inputs)},
          {"outputs", params(d.outputs)}};
}

std::vector<std::string> schema_problems(const std::vector<Param>& schema, const VariableMap& values,
                                         std::string_view what) {
  std::vector<std::string> problems;
  const std::string w(what);
  for (const auto& p : schema) {
    auto it = values.find(p.name);
    if (it == values.end()) {
      problems.push_back(w + " '" + p.name + "' is missing");
    } else if (!conforms(it->second, p.type)) {
      problems.push_back(w + " '" + p.name + "' must be " + to_string(p.type) + ", got " +
                         to_string(type_of(it->second)));
    }
  }
  for (const auto& [name, v] : values) {
    const bool known = std::any_of(schema.begin(), schema.end(), [&](const Param& p) { return p.name == name; });
    if (!known) problems.push_back(w + " '" + name + "' is not in the schema");
  }
  return problems;
}

VariableMap Connector::call(const VariableMap&, ConnectorContext&) {
  throw Error(ErrorCode::kUnsupported, descriptor().kind + " is not callable");
}

VariableMap Connector::extract(std::string_view) const {
  throw Error(ErrorCode::kUnsupported, descriptor().kind + " does not accept file uploads");
}

void ConnectorRegistry::add(std::unique_ptr<Connector> connector) {
  const std::string kind = connector->descriptor().kind;
  if (connectors_.count(kind)) throw Error(ErrorCode::kConflict, "connector kind '" + kind + "' registered twice");
  connectors_.emplace(kind, std::move(connector));
}

const Connector* ConnectorRegistry::find(std::string_view kind) const {
  auto it = connectors_.find(kind);
  return it == connectors_.end() ? nullptr : it->second.get();
}

std::vector<const ConnectorDescriptor*> ConnectorRegistry::descriptors() const {
  std::vector<const ConnectorDescriptor*> out;
  for (const auto& [k, c] : connectors_) out.push_back(&c->descriptor());
  return out;
}

std::set<std::string> ConnectorRegistry::kinds(std::optional<Mode> mode) const {
  std::set<std::string> out;
  for (const auto& [k, c] : connectors_) {
    if (!mode || c->descriptor().mode == *mode) out.insert(k);
  }
  return out;
}

VariableMap ConnectorRegistry::call(std::string_view kind, const VariableMap& inputs, ConnectorContext& ctx) {
  auto it = connectors_.find(kind);
  if (it == connectors_.end()) throw Error(ErrorCode::kNotFound, "unknown connector '" + std::string(kind) + "'");
  Connector& c = *it->second;
  const ConnectorDescriptor& d = c.descriptor();
  if (d.mode != Mode::kApiCall) throw Error(ErrorCode::kUnsupported, d.kind + " only accepts file uploads");
  auto problems = schema_problems(d.inputs, inputs, "input");
  if (!problems.empty()) throw Error(ErrorCode::kValidation, d.kind + ": inputs do not match the schema", problems);

  const int n = ++calls_[d.kind];
  if (auto f = faults_.find(d.kind); f != faults_.end()) {
    if (f->second.always || n <= f->second.fail_first) throw Error(ErrorCode::kConnector, f->second.message);
  }

  VariableMap out = c.call(inputs, ctx);
  problems = schema_problems(d.outputs, out, "output");
  if (!problems.empty()) throw Error(ErrorCode::kValidation, d.kind + ": outputs do not match the schema", problems);
  for (const auto& p : d.outputs) {
    Value& v = out.at(p.name);
    if (p.type == ValueType::kDecimal && std::holds_alternative<std::int64_t>(v)) {
      v = static_cast<double>(std::get<std::int64_t>(v));
    }
  }
  return out;
}

void ConnectorRegistry::inject_fault(const std::string& kind, FaultSpec spec) {
  faults_[kind] = std::move(spec);
  calls_[kind] = 0;
}

void ConnectorRegistry::clear_faults() { faults_.clear(); }

int ConnectorRegistry::calls(const std::string& kind) const {
  auto it = calls_.find(kind);
  return it == calls_.end() ? 0 : it->second;
}

}  // namespace agriflow::conn
