#include <deque>
#include <map>
#include <set>

#include "agriflow/model/process_definition.hpp"

namespace agriflow::model {

const char* to_string(NodeKind kind) noexcept {
  switch (kind) {
    case NodeKind::kStartEvent: return "startEvent";
    case NodeKind::kEndEvent: return "endEvent";
    case NodeKind::kUserTask: return "userTask";
    case NodeKind::kServiceTask: return "serviceTask";
    case NodeKind::kExclusiveGateway: return "exclusiveGateway";
    case NodeKind::kParallelGateway: return "parallelGateway";
    case NodeKind::kSubProcess: return "subProcess";
  }
  return "?";
}

std::optional<NodeKind> parse_node_kind(std::string_view name) noexcept {
  for (NodeKind k : {NodeKind::kStartEvent, NodeKind::kEndEvent, NodeKind::kUserTask, NodeKind::kServiceTask,
                     NodeKind::kExclusiveGateway, NodeKind::kParallelGateway, NodeKind::kSubProcess}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

const FlowNode* ProcessGraph::find_node(std::string_view id) const {
  for (const FlowNode& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const SequenceFlow* ProcessGraph::find_flow(std::string_view id) const {
  for (const SequenceFlow& f : flows) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

std::vector<const SequenceFlow*> ProcessGraph::outgoing(std::string_view node_id) const {
  std::vector<const SequenceFlow*> out;
  for (const SequenceFlow& f : flows) {
    if (f.source == node_id) out.push_back(&f);
  }
  return out;
}

std::vector<const SequenceFlow*> ProcessGraph::incoming(std::string_view node_id) const {
  std::vector<const SequenceFlow*> out;
  for (const SequenceFlow& f : flows) {
    if (f.target == node_id) out.push_back(&f);
  }
  return out;
}

std::vector<const FlowNode*> ProcessGraph::start_events() const {
  std::vector<const FlowNode*> out;
  for (const FlowNode& n : nodes) {
    if (n.kind == NodeKind::kStartEvent) out.push_back(&n);
  }
  return out;
}

namespace {

const FlowNode* find_recursive(const ProcessGraph& graph, std::string_view id, const std::string& owner,
                               const ProcessGraph** scope, std::string* parent) {
  for (const FlowNode& n : graph.nodes) {
    if (n.id == id) {
      if (scope) *scope = &graph;
      if (parent) *parent = owner;
      return &n;
    }
  }
  for (const FlowNode& n : graph.nodes) {
    if (n.kind == NodeKind::kSubProcess && n.child) {
      if (const FlowNode* hit = find_recursive(*n.child, id, n.id, scope, parent)) return hit;
    }
  }
  return nullptr;
}

void collect_service_tasks(const ProcessGraph& graph, std::vector<const FlowNode*>& out) {
  for (const FlowNode& n : graph.nodes) {
    if (n.kind == NodeKind::kServiceTask) out.push_back(&n);
    if (n.kind == NodeKind::kSubProcess && n.child) collect_service_tasks(*n.child, out);
  }
}

}  // namespace

const FlowNode* ProcessDefinition::find_node(std::string_view id, const ProcessGraph** scope,
                                             std::string* parent) const {
  return find_recursive(graph, id, std::string{}, scope, parent);
}

const ProcessGraph* ProcessDefinition::scope_graph(std::string_view subprocess_id) const {
  if (subprocess_id.empty()) return &graph;
  const FlowNode* n = find_node(subprocess_id);
  if (!n || n->kind != NodeKind::kSubProcess) return nullptr;
  return n->child.get();
}

std::vector<const FlowNode*> ProcessDefinition::service_tasks() const {
  std::vector<const FlowNode*> out;
  collect_service_tasks(graph, out);
  return out;
}

namespace {

void validate_scope(const ProcessGraph& g, const std::string& scope_label, bool is_subprocess,
                    std::set<std::string>& seen_ids, std::vector<std::string>& out) {
  for (const FlowNode& n : g.nodes) {
    if (!n.id.empty() && !seen_ids.insert(n.id).second) out.push_back("duplicate node id '" + n.id + "'");
  }
  std::set<std::string> flow_ids;
  for (const SequenceFlow& f : g.flows) {
    if (!f.id.empty() && !flow_ids.insert(f.id).second) out.push_back("duplicate sequenceFlow id '" + f.id + "'");
    if (!f.id.empty() && g.find_node(f.id)) out.push_back("sequenceFlow id '" + f.id + "' collides with a node id");
    if (!g.find_node(f.source)) {
      out.push_back("sequenceFlow '" + f.id + "' references unknown source '" + f.source + "'");
    }
    if (!g.find_node(f.target)) {
      out.push_back("sequenceFlow '" + f.id + "' references unknown target '" + f.target + "'");
    }
  }

  const auto starts = g.start_events();
  if (is_subprocess) {
    std::size_t plain = 0;
    for (const FlowNode* s : starts) {
      if (s->timer) out.push_back("startEvent '" + s->id + "' inside " + scope_label + " cannot be a timer");
      else ++plain;
    }
    if (plain != 1 || starts.size() != 1) {
      out.push_back(scope_label + " must contain exactly one plain startEvent");
    }
    bool has_end = false;
    for (const FlowNode& n : g.nodes) has_end = has_end || n.kind == NodeKind::kEndEvent;
    if (!has_end) out.push_back(scope_label + " must contain at least one endEvent");
  } else if (starts.empty()) {
    out.push_back("process has no startEvent");
  }

  for (const FlowNode& n : g.nodes) {
    const auto outs = g.outgoing(n.id);
    const auto ins = g.incoming(n.id);
    switch (n.kind) {
      case NodeKind::kStartEvent:
        if (!ins.empty()) out.push_back("startEvent '" + n.id + "' has incoming flows");
        if (outs.size() != 1) out.push_back("startEvent '" + n.id + "' must have exactly one outgoing flow");
        if (n.timer && n.timer->kind == TimerSpec::Kind::kCycle && n.timer->cycle.period.min_seconds() < 60) {
          out.push_back("startEvent '" + n.id + "' timer cycle '" + n.timer->expression + "' is shorter than 1 minute");
        }
        break;
      case NodeKind::kEndEvent:
        if (!outs.empty()) out.push_back("endEvent '" + n.id + "' has outgoing flows");
        break;
      case NodeKind::kUserTask:
      case NodeKind::kServiceTask:
      case NodeKind::kSubProcess:
        if (outs.size() != 1) {
          out.push_back(std::string(to_string(n.kind)) + " '" + n.id + "' must have exactly one outgoing flow");
        }
        break;
      case NodeKind::kExclusiveGateway: {
        if (outs.empty()) out.push_back("exclusiveGateway '" + n.id + "' has no outgoing flow");
        bool default_is_outgoing = !n.default_flow.has_value();
        for (const SequenceFlow* f : outs) {
          const bool is_default = n.default_flow && *n.default_flow == f->id;
          default_is_outgoing = default_is_outgoing || is_default;
          if (is_default && f->condition) {
            out.push_back("default flow '" + f->id + "' of exclusiveGateway '" + n.id + "' must not have a condition");
          }
          if (outs.size() >= 2 && !is_default && !f->condition) {
            out.push_back("exclusiveGateway '" + n.id + "' outgoing flow '" + f->id +
                          "' has neither condition nor default status");
          }
        }
        if (!default_is_outgoing) {
          out.push_back("exclusiveGateway '" + n.id + "' default '" + *n.default_flow + "' is not one of its outgoing flows");
        }
        break;
      }
      case NodeKind::kParallelGateway:
        if (outs.empty()) out.push_back("parallelGateway '" + n.id + "' has no outgoing flow");
        if (ins.empty()) out.push_back("parallelGateway '" + n.id + "' has no incoming flow");
        break;
    }
    if (n.kind != NodeKind::kExclusiveGateway) {
      for (const SequenceFlow* f : outs) {
        if (f->condition) {
          out.push_back("sequenceFlow '" + f->id + "' has a condition but does not leave an exclusiveGateway");
        }
      }
    }
    if (n.kind == NodeKind::kUserTask) {
      std::set<std::string> names;
      for (const FormField& field : n.form_fields) {
        if (!names.insert(field.name).second) {
          out.push_back("userTask '" + n.id + "' declares form field '" + field.name + "' twice");
        }
      }
    }
    if (n.kind == NodeKind::kSubProcess) {
      if (!n.child) out.push_back("subProcess '" + n.id + "' has no body");
      else validate_scope(*n.child, "subProcess '" + n.id + "'", true, seen_ids, out);
    }
  }

  // Reachability from the scope's start events.
  std::set<std::string> reached;
  std::deque<std::string> frontier;
  for (const FlowNode* s : starts) {
    reached.insert(s->id);
    frontier.push_back(s->id);
  }
  while (!frontier.empty()) {
    const std::string id = frontier.front();
    frontier.pop_front();
    for (const SequenceFlow* f : g.outgoing(id)) {
      if (g.find_node(f->target) && reached.insert(f->target).second) frontier.push_back(f->target);
    }
  }
  for (const FlowNode& n : g.nodes) {
    if (!reached.count(n.id)) out.push_back("node '" + n.id + "' is unreachable from any start event");
  }
}

}  // namespace

std::vector<std::string> validate(const ProcessDefinition& def) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  validate_scope(def.graph, "process", false, seen, out);
  return out;
}

std::vector<std::string> validate_timers(const ProcessDefinition& def, Timestamp now) {
  std::vector<std::string> out;
  for (const FlowNode* s : def.graph.start_events()) {
    if (s->timer && s->timer->kind == TimerSpec::Kind::kDate && s->timer->date <= now) {
      out.push_back("startEvent '" + s->id + "' timer date " + s->timer->expression + " is not in the future");
    }
  }
  return out;
}

std::vector<std::string> validate_connectors(const ProcessDefinition& def, const std::set<std::string>& registry) {
  std::vector<std::string> out;
  for (const FlowNode* n : def.service_tasks()) {
    if (!registry.count(n->connector_ref)) {
      out.push_back("serviceTask '" + n->id + "' references unregistered connector '" + n->connector_ref + "'");
    }
  }
  return out;
}

}  // namespace agriflow::model
