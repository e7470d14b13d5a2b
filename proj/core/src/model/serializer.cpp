#include "agriflow/model/process_definition.hpp"
#include "agriflow/model/xml.hpp"

namespace agriflow::model {

namespace {

using Attrs = std::vector<std::pair<std::string, std::string>>;

void write_scope(xml::Writer& w, const ProcessGraph& g);

void write_node(xml::Writer& w, const FlowNode& n) {
  const std::string tag = std::string("bpmn:") + to_string(n.kind);
  Attrs attrs{{"id", n.id}};
  if (!n.name.empty()) attrs.emplace_back("name", n.name);

  switch (n.kind) {
    case NodeKind::kStartEvent:
      if (!n.timer) {
        w.leaf(tag, attrs);
        return;
      }
      w.open(tag, attrs);
      w.open("bpmn:timerEventDefinition");
      w.text_element(n.timer->kind == TimerSpec::Kind::kCycle ? "bpmn:timeCycle" : "bpmn:timeDate",
                     n.timer->expression);
      w.close("bpmn:timerEventDefinition");
      w.close(tag);
      return;
    case NodeKind::kUserTask:
      if (n.candidate_role) attrs.emplace_back("agri:candidateRole", to_string(*n.candidate_role));
      if (n.form_fields.empty() && n.display_variables.empty()) {
        w.leaf(tag, attrs);
        return;
      }
      w.open(tag, attrs);
      w.open("bpmn:extensionElements");
      for (const FormField& f : n.form_fields) {
        Attrs fa{{"name", f.name}, {"type", to_string(f.type)}, {"required", f.required ? "true" : "false"}};
        if (!f.label.empty()) fa.emplace_back("label", f.label);
        w.leaf("agri:formField", fa);
      }
      for (const std::string& v : n.display_variables) w.leaf("agri:display", {{"variable", v}});
      w.close("bpmn:extensionElements");
      w.close(tag);
      return;
    case NodeKind::kServiceTask:
      attrs.emplace_back("agri:connector", n.connector_ref);
      if (n.inputs.empty() && n.outputs.empty()) {
        w.leaf(tag, attrs);
        return;
      }
      w.open(tag, attrs);
      w.open("bpmn:extensionElements");
      for (const InputMapping& in : n.inputs) {
        if (in.variable) {
          w.leaf("agri:input", {{"name", in.name}, {"variable", *in.variable}});
        } else if (in.literal) {
          w.leaf("agri:input", {{"name", in.name}, {"value", display(*in.literal)}, {"type", to_string(type_of(*in.literal))}});
        }
      }
      for (const OutputMapping& out : n.outputs) w.leaf("agri:output", {{"name", out.name}, {"variable", out.variable}});
      w.close("bpmn:extensionElements");
      w.close(tag);
      return;
    case NodeKind::kExclusiveGateway:
      if (n.default_flow) attrs.emplace_back("default", *n.default_flow);
      w.leaf(tag, attrs);
      return;
    case NodeKind::kSubProcess:
      w.open(tag, attrs);
      if (n.child) write_scope(w, *n.child);
      w.close(tag);
      return;
    default:
      w.leaf(tag, attrs);
      return;
  }
}

void write_scope(xml::Writer& w, const ProcessGraph& g) {
  for (const FlowNode& n : g.nodes) write_node(w, n);
  for (const SequenceFlow& f : g.flows) {
    Attrs attrs{{"id", f.id}};
    if (!f.name.empty()) attrs.emplace_back("name", f.name);
    attrs.emplace_back("sourceRef", f.source);
    attrs.emplace_back("targetRef", f.target);
    if (!f.condition) {
      w.leaf("bpmn:sequenceFlow", attrs);
      continue;
    }
    w.open("bpmn:sequenceFlow", attrs);
    w.text_element("bpmn:conditionExpression", f.condition->source_text());
    w.close("bpmn:sequenceFlow");
  }
}

}  // namespace

std::string serialize_definition(const ProcessDefinition& def) {
  xml::Writer w;
  w.open("bpmn:definitions", {{"xmlns:bpmn", std::string(kBpmnNamespace)},
                              {"xmlns:agri", std::string(kExtensionNamespace)},
                              {"id", def.id + "_definitions"}});
  w.open("bpmn:process", {{"id", def.id}, {"name", def.name}, {"isExecutable", "true"}});
  write_scope(w, def.graph);
  w.close("bpmn:process");
  w.close("bpmn:definitions");
  return w.str();
}

}  // namespace agriflow::model
