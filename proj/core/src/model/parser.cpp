#include <algorithm>
#include <map>

#include "agriflow/error.hpp"
#include "agriflow/model/process_definition.hpp"
#include "agriflow/model/xml.hpp"

namespace agriflow::model {

namespace {

using xml::Element;

struct ParseContext {
  std::vector<std::string> violations;
  bool unsupported = false;
  std::map<std::string, std::string> lane_roles;  // node id -> lane name

  void fail(const Element& at, const std::string& what) {
    violations.push_back(what + " (line " + std::to_string(at.line) + ")");
  }
  void reject(const Element& el) {
    unsupported = true;
    violations.push_back("unsupported element '" + el.name + "' (line " + std::to_string(el.line) + ")");
  }
};

bool is_bpmn(const Element& el) { return el.ns == kBpmnNamespace; }
bool is_ext(const Element& el) { return el.ns == kExtensionNamespace; }

std::string attr_or(const Element& el, std::string_view name, std::string fallback = {}) {
  const std::string* v = el.attr(name);
  return v ? *v : fallback;
}

const std::string* ext_attr(const Element& el, std::string_view name) {
  if (const std::string* v = el.attr(name, kExtensionNamespace)) return v;
  return nullptr;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

void collect_lanes(const Element& lane_set, ParseContext& ctx) {
  for (const Element& lane : lane_set.children) {
    if (!is_bpmn(lane) || lane.name != "lane") {
      if (!(is_bpmn(lane) && lane.name == "documentation")) ctx.reject(lane);
      continue;
    }
    const std::string lane_name = attr_or(lane, "name");
    for (const Element& ref : lane.children) {
      if (is_bpmn(ref) && ref.name == "flowNodeRef") {
        ctx.lane_roles[trim(ref.text)] = lane_name;
      } else if (is_bpmn(ref) && ref.name == "childLaneSet") {
        collect_lanes(ref, ctx);
      } else if (!(is_bpmn(ref) && ref.name == "documentation")) {
        ctx.reject(ref);
      }
    }
  }
}

// Children every flow node may carry without affecting execution.
bool is_passive_child(const Element& el) {
  return is_bpmn(el) && (el.name == "incoming" || el.name == "outgoing" || el.name == "documentation");
}

void parse_user_task_extensions(const Element& ext, FlowNode& node, ParseContext& ctx) {
  for (const Element& item : ext.children) {
    if (!is_ext(item)) continue;  // other vendors' extensions carry no semantics here
    if (item.name == "formField") {
      FormField field;
      field.name = attr_or(item, "name");
      field.label = attr_or(item, "label");
      field.required = attr_or(item, "required", "false") == "true";
      const std::string type = attr_or(item, "type", "text");
      if (auto t = parse_value_type(type)) field.type = *t;
      else ctx.fail(item, "userTask '" + node.id + "' form field '" + field.name + "' has unknown type '" + type + "'");
      if (field.name.empty()) ctx.fail(item, "userTask '" + node.id + "' has a form field without a name");
      node.form_fields.push_back(std::move(field));
    } else if (item.name == "display") {
      node.display_variables.push_back(attr_or(item, "variable"));
    } else {
      ctx.reject(item);
    }
  }
}

void parse_service_task_extensions(const Element& ext, FlowNode& node, ParseContext& ctx) {
  for (const Element& item : ext.children) {
    if (!is_ext(item)) continue;
    if (item.name == "input") {
      InputMapping in;
      in.name = attr_or(item, "name");
      if (const std::string* var = item.attr("variable")) in.variable = *var;
      if (const std::string* val = item.attr("value")) {
        const std::string type = attr_or(item, "type", "text");
        auto t = parse_value_type(type);
        if (!t) {
          ctx.fail(item, "serviceTask '" + node.id + "' input '" + in.name + "' has unknown type '" + type + "'");
        } else {
          try {
            in.literal = parse_value(*t, *val);
          } catch (const Error& e) {
            ctx.fail(item, "serviceTask '" + node.id + "' input '" + in.name + "': " + e.what());
          }
        }
      }
      if (in.name.empty() || in.variable.has_value() == (item.attr("value") != nullptr)) {
        ctx.fail(item, "serviceTask '" + node.id + "' input '" + in.name +
                           "' needs a name and exactly one of variable/value");
      }
      node.inputs.push_back(std::move(in));
    } else if (item.name == "output") {
      OutputMapping out{attr_or(item, "name"), attr_or(item, "variable")};
      if (out.variable.empty()) out.variable = out.name;
      if (out.name.empty()) ctx.fail(item, "serviceTask '" + node.id + "' has an output without a name");
      node.outputs.push_back(std::move(out));
    } else {
      ctx.reject(item);
    }
  }
}

std::shared_ptr<const ProcessGraph> parse_scope(const Element& scope, ParseContext& ctx);

std::optional<FlowNode> parse_node(const Element& el, ParseContext& ctx) {
  static const std::map<std::string, NodeKind, std::less<>> kKinds = {
      {"startEvent", NodeKind::kStartEvent},
      {"endEvent", NodeKind::kEndEvent},
      {"userTask", NodeKind::kUserTask},
      {"serviceTask", NodeKind::kServiceTask},
      {"exclusiveGateway", NodeKind::kExclusiveGateway},
      {"parallelGateway", NodeKind::kParallelGateway},
      {"subProcess", NodeKind::kSubProcess},
  };
  auto kind = kKinds.find(el.name);
  if (kind == kKinds.end()) return std::nullopt;

  FlowNode node;
  node.id = attr_or(el, "id");
  node.name = attr_or(el, "name");
  node.kind = kind->second;
  if (node.id.empty()) ctx.fail(el, el.name + " without id");

  for (const Element& child : el.children) {
    if (is_passive_child(child)) continue;
    if (is_bpmn(child) && child.name == "extensionElements") {
      if (node.kind == NodeKind::kUserTask) parse_user_task_extensions(child, node, ctx);
      else if (node.kind == NodeKind::kServiceTask) parse_service_task_extensions(child, node, ctx);
      continue;
    }
    if (node.kind == NodeKind::kStartEvent && is_bpmn(child) && child.name == "timerEventDefinition") {
      bool found = false;
      for (const Element& spec : child.children) {
        if (!is_bpmn(spec)) continue;
        std::optional<TimerSpec::Kind> tk;
        if (spec.name == "timeCycle") tk = TimerSpec::Kind::kCycle;
        else if (spec.name == "timeDate") tk = TimerSpec::Kind::kDate;
        else if (spec.name == "documentation") continue;
        else {
          ctx.reject(spec);
          continue;
        }
        found = true;
        auto timer = parse_timer(*tk, trim(spec.text));
        if (!timer) ctx.fail(spec, "startEvent '" + node.id + "' has malformed timer '" + trim(spec.text) + "'");
        else node.timer = std::move(timer);
      }
      if (!found) ctx.fail(child, "startEvent '" + node.id + "' timer has no timeCycle or timeDate");
      continue;
    }
    if (node.kind == NodeKind::kSubProcess) continue;  // body handled by parse_scope
    ctx.reject(child);
  }

  switch (node.kind) {
    case NodeKind::kUserTask: {
      std::string role_text;
      if (const std::string* r = ext_attr(el, "candidateRole")) role_text = *r;
      else if (auto lane = ctx.lane_roles.find(node.id); lane != ctx.lane_roles.end()) role_text = lane->second;
      if (role_text.empty()) {
        ctx.fail(el, "userTask '" + node.id + "' has no candidate role");
      } else if (auto role = parse_role(role_text)) {
        node.candidate_role = *role;
      } else {
        ctx.fail(el, "userTask '" + node.id + "' names unknown role '" + role_text + "'");
      }
      break;
    }
    case NodeKind::kServiceTask:
      if (const std::string* c = ext_attr(el, "connector")) node.connector_ref = *c;
      if (node.connector_ref.empty()) ctx.fail(el, "serviceTask '" + node.id + "' has no connector reference");
      break;
    case NodeKind::kExclusiveGateway:
      if (const std::string* d = el.attr("default")) node.default_flow = *d;
      break;
    case NodeKind::kSubProcess:
      node.child = parse_scope(el, ctx);
      break;
    default:
      break;
  }
  return node;
}

std::optional<SequenceFlow> parse_flow(const Element& el, ParseContext& ctx) {
  SequenceFlow flow;
  flow.id = attr_or(el, "id");
  flow.name = attr_or(el, "name");
  flow.source = attr_or(el, "sourceRef");
  flow.target = attr_or(el, "targetRef");
  if (flow.id.empty()) ctx.fail(el, "sequenceFlow without id");
  for (const Element& child : el.children) {
    if (is_bpmn(child) && child.name == "conditionExpression") {
      const std::string text = trim(child.text);
      try {
        flow.condition = expr::parse_expr(text);
      } catch (const Error& e) {
        ctx.fail(child, "sequenceFlow '" + flow.id + "' condition: " + e.what());
      }
    } else if (!is_passive_child(child) && !(is_bpmn(child) && child.name == "extensionElements")) {
      ctx.reject(child);
    }
  }
  return flow;
}

std::shared_ptr<const ProcessGraph> parse_scope(const Element& scope, ParseContext& ctx) {
  auto graph = std::make_shared<ProcessGraph>();
  for (const Element& el : scope.children) {
    if (is_bpmn(el) && el.name == "laneSet") collect_lanes(el, ctx);
  }
  for (const Element& el : scope.children) {
    if (!is_bpmn(el)) {
      ctx.reject(el);
      continue;
    }
    if (el.name == "laneSet" || el.name == "documentation" || el.name == "extensionElements" ||
        el.name == "incoming" || el.name == "outgoing") {
      continue;
    }
    if (el.name == "sequenceFlow") {
      if (auto f = parse_flow(el, ctx)) graph->flows.push_back(std::move(*f));
      continue;
    }
    if (auto node = parse_node(el, ctx)) {
      graph->nodes.push_back(std::move(*node));
      continue;
    }
    ctx.reject(el);
  }
  return graph;
}

}  // namespace

std::optional<TimerSpec> parse_timer(TimerSpec::Kind kind, std::string_view text) {
  TimerSpec spec;
  spec.kind = kind;
  spec.expression = std::string(text);
  if (kind == TimerSpec::Kind::kCycle) {
    auto cycle = parse_repeating_interval(text);
    if (!cycle) return std::nullopt;
    spec.cycle = *cycle;
  } else {
    auto date = parse_timestamp(text);
    if (!date) return std::nullopt;
    spec.date = *date;
  }
  return spec;
}

ProcessDefinition parse_definition(std::string_view xml_bytes) {
  const Element root = xml::parse(xml_bytes);
  ParseContext ctx;
  if (!is_bpmn(root) || root.name != "definitions") {
    throw Error(ErrorCode::kValidation, "root element must be bpmn:definitions",
                {"root element '" + root.name + "' is not bpmn:definitions"});
  }

  const Element* process = nullptr;
  for (const Element& child : root.children) {
    if (is_bpmn(child) && child.name == "process") {
      if (process) ctx.fail(child, "only one process per definitions document is supported");
      else process = &child;
    } else if (child.ns == kDiagramNamespace || (is_bpmn(child) && child.name == "documentation")) {
      // Diagram interchange only describes layout.
    } else {
      ctx.reject(child);
    }
  }

  ProcessDefinition def;
  if (!process) {
    ctx.violations.push_back("definitions contain no process");
  } else {
    def.id = attr_or(*process, "id");
    def.name = attr_or(*process, "name", def.id);
    if (def.id.empty()) ctx.fail(*process, "process without id");
    auto graph = parse_scope(*process, ctx);
    def.graph = *graph;
    for (const FlowNode* s : def.graph.start_events()) def.start_nodes.push_back(s->id);
    auto structural = validate(def);
    ctx.violations.insert(ctx.violations.end(), structural.begin(), structural.end());
  }

  if (!ctx.violations.empty()) {
    const ErrorCode code = ctx.unsupported ? ErrorCode::kUnsupported : ErrorCode::kValidation;
    std::string message = ctx.unsupported ? "process definition uses unsupported elements"
                                          : "process definition failed validation";
    message += " (" + std::to_string(ctx.violations.size()) + " violation" +
               (ctx.violations.size() == 1 ? "" : "s") + ")";
    throw Error(code, std::move(message), std::move(ctx.violations));
  }
  return def;
}

}  // namespace agriflow::model
