#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "agriflow/store/journal.hpp"
#include "agriflow/time.hpp"
#include "agriflow/value.hpp"

namespace agriflow::conn {

enum class Mode { kApiCall, kFileUpload };
const char* to_string(Mode m) noexcept;

struct Param {
  std::string name;
  ValueType type = ValueType::kText;
};

/// Closed input and output schemas of one connector kind. File-upload
/// connectors have no inputs; their outputs are the report's declared fields.
struct ConnectorDescriptor {
  std::string kind;
  Mode mode = Mode::kApiCall;
  std::string title;
  std::vector<Param> inputs;
  std::vector<Param> outputs;
};

nlohmann::json to_json(const ConnectorDescriptor& d);

/// Missing, unknown and mistyped fields of `values` against `schema`.
std::vector<std::string> schema_problems(const std::vector<Param>& schema, const VariableMap& values,
                                         std::string_view what);

struct NotificationRequest {
  std::string recipient_role;
  std::string severity;
  std::string event;
  std::string body;
};

/// What a connector may touch while serving one job.
struct ConnectorContext {
  Timestamp now{};
  std::string job_id;
  std::optional<std::string> instance_id;
  std::function<std::vector<store::EventRecord>(const store::HistoryFilter&)> history;
  /// Stores a generated document (idempotent by content) and returns its reference.
  std::function<DocumentRef(const std::string& kind, const std::string& content, const nlohmann::json& metadata,
                            const VariableMap& variables)>
      store_document;
  /// Raises a notification once per job and returns its id.
  std::function<std::string(const NotificationRequest&)> notify;
};

class Connector {
 public:
  virtual ~Connector() = default;
  virtual const ConnectorDescriptor& descriptor() const = 0;
  /// kApiCall connectors. Inputs are already schema-checked.
  virtual VariableMap call(const VariableMap& inputs, ConnectorContext& ctx);
  /// kFileUpload connectors: parses an uploaded report into its declared
  /// fields. Throws Error(kValidation) with one detail per problem.
  virtual VariableMap extract(std::string_view bytes) const;
};

struct FaultSpec {
  int fail_first = 0;   // fail this many calls, then recover
  bool always = false;  // fail every call
  std::string message = "simulated provider outage";
};

/// Connector kinds by name, with scripted fault injection for tests.
class ConnectorRegistry {
 public:
  void add(std::unique_ptr<Connector> connector);
  const Connector* find(std::string_view kind) const;
  std::vector<const ConnectorDescriptor*> descriptors() const;
  std::set<std::string> kinds(std::optional<Mode> mode = std::nullopt) const;

  /// Checks inputs, applies injected faults, calls, checks and normalizes
  /// outputs (integers in decimal slots become decimals).
  /// Errors: kNotFound (kind), kValidation (schema), kConnector (provider).
  VariableMap call(std::string_view kind, const VariableMap& inputs, ConnectorContext& ctx);

  void inject_fault(const std::string& kind, FaultSpec spec);
  void clear_faults();
  int calls(const std::string& kind) const;

 private:
  std::map<std::string, std::unique_ptr<Connector>, std::less<>> connectors_;
  std::map<std::string, FaultSpec> faults_;
  std::map<std::string, int> calls_;
};

}  // namespace agriflow::conn
