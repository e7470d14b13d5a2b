#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "agriflow/expr/condition.hpp"
#include "agriflow/roles.hpp"
#include "agriflow/time.hpp"
#include "agriflow/value.hpp"

namespace agriflow::model {

inline constexpr std::string_view kBpmnNamespace = "http://www.omg.org/spec/BPMN/20100524/MODEL";
inline constexpr std::string_view kDiagramNamespace = "http://www.omg.org/spec/BPMN/20100524/DI";
inline constexpr std::string_view kExtensionNamespace = "http://agriflow.dev/schema/bpmn/1.0";

enum class NodeKind {
  kStartEvent,
  kEndEvent,
  kUserTask,
  kServiceTask,
  kExclusiveGateway,
  kParallelGateway,
  kSubProcess,
};

const char* to_string(NodeKind kind) noexcept;
std::optional<NodeKind> parse_node_kind(std::string_view name) noexcept;

/// Activities are the units counted by progress reporting.
constexpr bool is_activity(NodeKind k) noexcept {
  return k == NodeKind::kUserTask || k == NodeKind::kServiceTask || k == NodeKind::kSubProcess;
}

struct TimerSpec {
  enum class Kind { kCycle, kDate };
  Kind kind = Kind::kCycle;
  std::string expression;     // verbatim text from the definition
  RepeatingInterval cycle;    // valid when kind == kCycle
  Timestamp date{};           // valid when kind == kDate
};

/// Parses "R/P1D"-style cycles or UTC timestamps. Returns nullopt when malformed.
std::optional<TimerSpec> parse_timer(TimerSpec::Kind kind, std::string_view text);

struct FormField {
  std::string name;
  ValueType type = ValueType::kText;
  bool required = false;
  std::string label;
  friend bool operator==(const FormField&, const FormField&) = default;
};

/// Connector parameter bound either from a process variable or a literal.
struct InputMapping {
  std::string name;
  std::optional<std::string> variable;
  std::optional<Value> literal;
  friend bool operator==(const InputMapping&, const InputMapping&) = default;
};

/// Connector output copied into a process variable.
struct OutputMapping {
  std::string name;
  std::string variable;
  friend bool operator==(const OutputMapping&, const OutputMapping&) = default;
};

struct ProcessGraph;

struct FlowNode {
  std::string id;
  std::string name;
  NodeKind kind = NodeKind::kEndEvent;

  std::optional<TimerSpec> timer;  // start events only

  std::optional<Role> candidate_role;  // user tasks
  std::vector<FormField> form_fields;
  std::vector<std::string> display_variables;

  std::string connector_ref;  // service tasks
  std::vector<InputMapping> inputs;
  std::vector<OutputMapping> outputs;

  std::optional<std::string> default_flow;  // exclusive gateways

  std::shared_ptr<const ProcessGraph> child;  // sub-processes
};

struct SequenceFlow {
  std::string id;
  std::string name;
  std::string source;
  std::string target;
  std::optional<expr::ConditionExpression> condition;
};

/// One scope level: the top-level process or the body of a sub-process.
struct ProcessGraph {
  std::vector<FlowNode> nodes;
  std::vector<SequenceFlow> flows;

  const FlowNode* find_node(std::string_view id) const;
  const SequenceFlow* find_flow(std::string_view id) const;
  /// Outgoing flows of `node_id` in document order.
  std::vector<const SequenceFlow*> outgoing(std::string_view node_id) const;
  std::vector<const SequenceFlow*> incoming(std::string_view node_id) const;
  std::vector<const FlowNode*> start_events() const;
};

struct ProcessDefinition {
  std::string id;
  std::string name;
  int version = 0;  // 0 until deployed
  ProcessGraph graph;
  std::vector<std::string> start_nodes;

  /// Locates a node anywhere in the nesting. `scope` receives the graph that
  /// owns it and `parent` the enclosing sub-process id (empty at top level).
  const FlowNode* find_node(std::string_view id, const ProcessGraph** scope = nullptr,
                            std::string* parent = nullptr) const;
  /// Owning graph of a sub-process body, or the top-level graph for "".
  const ProcessGraph* scope_graph(std::string_view subprocess_id) const;
  /// Every service-task node, including those nested in sub-processes.
  std::vector<const FlowNode*> service_tasks() const;
};

/// Parses and validates a BPMN XML document. On failure throws Error with
/// code kSyntax (malformed XML), kUnsupported (when any unsupported element is
/// present) or kValidation; details() lists every violation found.
ProcessDefinition parse_definition(std::string_view xml_bytes);

/// Structural validation; empty result means valid.
std::vector<std::string> validate(const ProcessDefinition& def);

/// Deployment-time timer rules: date timers must lie after `now`.
std::vector<std::string> validate_timers(const ProcessDefinition& def, Timestamp now);

/// XML that parse_definition maps back to an isomorphic definition.
std::string serialize_definition(const ProcessDefinition& def);

/// Empty iff every service task's connector appears in `registry`.
std::vector<std::string> validate_connectors(const ProcessDefinition& def, const std::set<std::string>& registry);

}  // namespace agriflow::model
