#include "agriflow/api/router.hpp"

#include <algorithm>
#include <cctype>

#include "agriflow/error.hpp"
#include "agriflow/geo/index.hpp"
#include "agriflow/geo/raster.hpp"
#include "agriflow/geo/render.hpp"
#include "agriflow/model/process_definition.hpp"

namespace agriflow::api {

using engine::Actor;
using engine::Instance;
using engine::RuntimeState;
using engine::UserTask;
using nlohmann::json;

std::string Request::header(std::string_view name) const {
  for (const auto& [k, v] : headers) {
    if (k.size() == name.size() &&
        std::equal(k.begin(), k.end(), name.begin(), [](char a, char b) { return std::tolower(a) == std::tolower(b); })) {
      return v;
    }
  }
  return {};
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kSyntax: return 400;
    case ErrorCode::kInvalidArgument: return 400;
    case ErrorCode::kUnauthenticated: return 401;
    case ErrorCode::kForbidden: return 403;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kUnsupported: return 422;
    case ErrorCode::kValidation: return 422;
    case ErrorCode::kEvaluation: return 422;
    case ErrorCode::kStorage: return 500;
    case ErrorCode::kConnector: return 502;
  }
  return 500;
}

json error_envelope(const std::string& code, const std::string& message, const std::vector<std::string>& details) {
  return {{"code", code}, {"message", message}, {"details", details}};
}

namespace {

const std::set<Role> kManagers{Role::kFarmManager, Role::kAgronomist};
const std::set<Role> kMonitor{Role::kFarmManager, Role::kAgronomist, Role::kFieldWorker, Role::kDroneOperator,
                              Role::kQcDeviceUser};
const std::set<Role> kUploaders{Role::kFarmManager, Role::kAgronomist, Role::kDroneOperator, Role::kQcDeviceUser,
                                Role::kExternalProvider};
const std::set<Role> kMapViewers{Role::kFarmManager, Role::kAgronomist, Role::kDroneOperator};

struct Ctx {
  const Request& req;
  const User* user = nullptr;
  Actor actor;
  std::map<std::string, std::string> params;
  std::map<std::string, std::string> query;
};

Response json_response(int status, const json& body) { return Response{status, "application/json", body.dump()}; }

[[noreturn]] void fail(ErrorCode code, const std::string& message, std::vector<std::string> details = {}) {
  throw Error(code, message, std::move(details));
}

json body_json(const Ctx& c) {
  if (c.req.body.empty()) return json::object();
  try {
    json j = json::parse(c.req.body);
    if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kInvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
}

bool manager(const Actor& a) { return a.has(Role::kFarmManager) || a.has(Role::kAgronomist); }

json opt_time(const std::optional<Timestamp>& t) { return t ? json(format_timestamp(*t)) : json(nullptr); }

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// ---- JSON views -------------------------------------------------------------

json task_json(const RuntimeState& s, const UserTask& t) {
  const Instance& inst = s.instances.at(t.instance_id);
  json form = json::array();
  for (const auto& f : t.form_fields) {
    form.push_back({{"name", f.name}, {"type", to_string(f.type)}, {"required", f.required}, {"label", f.label}});
  }
  json display = json::object();
  for (const auto& v : t.display_variables) {
    auto it = inst.variables.find(v);
    display[v] = it == inst.variables.end() ? json(nullptr) : to_json(it->second);
  }
  const auto* d = s.find_definition(inst.definition_id, inst.version);
  return {{"id", t.id},
          {"instance_id", t.instance_id},
          {"definition_id", inst.definition_id},
          {"definition_name", d ? d->name : inst.definition_id},
          {"node", t.node},
          {"name", t.name},
          {"candidate_role", t.candidate_role ? json(to_string(*t.candidate_role)) : json(nullptr)},
          {"assignee", t.assignee ? json(*t.assignee) : json(nullptr)},
          {"state", to_string(t.state)},
          {"created_at", format_timestamp(t.created_at)},
          {"completed_at", opt_time(t.completed_at)},
          {"completed_by", t.completed_by ? json(*t.completed_by) : json(nullptr)},
          {"form", form},
          {"display", display},
          {"submitted", to_json(t.submitted_values)}};
}

json instance_summary(const RuntimeState& s, const Instance& inst) {
  const auto* d = s.find_definition(inst.definition_id, inst.version);
  std::size_t completed = 0;
  for (const auto& a : inst.activities) completed += a.state == "completed" ? 1 : 0;
  json activities = json::array();
  for (const auto& a : inst.activities) {
    activities.push_back({{"key", a.key}, {"node", a.node}, {"name", a.name}, {"kind", model::to_string(a.kind)}, {"state", a.state}});
  }
  json tasks = json::array();
  for (const auto& [id, t] : s.tasks) {
    if (t.instance_id != inst.id) continue;
    tasks.push_back({{"id", t.id},
                     {"node", t.node},
                     {"name", t.name},
                     {"state", to_string(t.state)},
                     {"candidate_role", t.candidate_role ? json(to_string(*t.candidate_role)) : json(nullptr)},
                     {"assignee", t.assignee ? json(*t.assignee) : json(nullptr)}});
  }
  const double progress =
      inst.activities.empty() ? (inst.status == engine::InstanceStatus::kCompleted ? 1.0 : 0.0)
                              : static_cast<double>(completed) / static_cast<double>(inst.activities.size());
  return {{"instance_id", inst.id},
          {"definition_id", inst.definition_id},
          {"definition_name", d ? d->name : inst.definition_id},
          {"version", inst.version},
          {"status", to_string(inst.status)},
          {"trigger", inst.trigger},
          {"started_by", inst.started_by},
          {"created_at", format_timestamp(inst.created_at)},
          {"ended_at", opt_time(inst.ended_at)},
          {"failure", inst.failure},
          {"progress", progress},
          {"completed_activities", completed},
          {"activated_activities", inst.activities.size()},
          {"activities", activities},
          {"tasks", tasks}};
}

json notification_json(const engine::Notification& n) {
  json fwd = json::array();
  for (const auto& c : n.forwarded_to) fwd.push_back({{"name", c.name}, {"address", c.address}});
  return {{"id", n.id},
          {"recipient_role", n.recipient_role},
          {"severity", n.severity},
          {"body", n.body},
          {"source", n.source},
          {"event", n.event},
          {"instance_id", n.instance_id ? json(*n.instance_id) : json(nullptr)},
          {"created_at", format_timestamp(n.created_at)},
          {"forwarded_to", fwd},
          {"read", n.read}};
}

json view_json(const engine::View& v) {
  json entries = json::array();
  for (const auto& e : v.entries) entries.push_back({{"source", e.source}, {"params", e.params}});
  return {{"id", v.id}, {"title", v.title}, {"entries", entries}};
}

json graph_json(const model::ProcessGraph& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json node{{"id", n.id}, {"name", n.name}, {"kind", model::to_string(n.kind)}};
    if (n.timer) node["timer"] = n.timer->expression;
    if (n.candidate_role) node["candidate_role"] = to_string(*n.candidate_role);
    if (!n.form_fields.empty()) {
      json form = json::array();
      for (const auto& f : n.form_fields) {
        form.push_back({{"name", f.name}, {"type", to_string(f.type)}, {"required", f.required}, {"label", f.label}});
      }
      node["form"] = form;
    }
    if (!n.connector_ref.empty()) node["connector"] = n.connector_ref;
    if (n.default_flow) node["default_flow"] = *n.default_flow;
    if (n.child) node["children"] = graph_json(*n.child);
    nodes.push_back(std::move(node));
  }
  json flows = json::array();
  for (const auto& f : g.flows) {
    flows.push_back({{"id", f.id},
                     {"name", f.name},
                     {"source", f.source},
                     {"target", f.target},
                     {"condition", f.condition ? json(f.condition->source_text()) : json(nullptr)}});
  }
  return {{"nodes", nodes}, {"flows", flows}};
}

// ---- visibility rules ---------------------------------------------------------

bool sees_notification(const Actor& a, const engine::Notification& n) {
  if (a.has(Role::kFarmManager)) return true;
  const auto role = parse_role(n.recipient_role);
  return role && a.has(*role);
}

bool owns_work_in(const RuntimeState& s, const Instance& inst, const Actor& a) {
  for (const auto& [id, t] : s.tasks) {
    if (t.instance_id != inst.id) continue;
    if (t.assignee == a.user_id || t.completed_by == a.user_id) return true;
    if (t.candidate_role && a.has(*t.candidate_role)) return true;
  }
  return false;
}

const engine::Notification& visible_notification(const RuntimeState& s, const Ctx& c) {
  auto it = s.notifications.find(c.params.at("id"));
  if (it == s.notifications.end()) fail(ErrorCode::kNotFound, "unknown notification '" + c.params.at("id") + "'");
  if (!sees_notification(c.actor, it->second)) fail(ErrorCode::kForbidden, "notification is not addressed to you");
  return it->second;
}

// Form values arrive as JSON; document fields may be given as plain ids.
VariableMap form_values(const json& j, const UserTask* task) {
  if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "values must be a JSON object");
  VariableMap out;
  for (const auto& [k, v] : j.items()) {
    Value value;
    try {
      value = value_from_json(v);
    } catch (const Error& e) {
      fail(ErrorCode::kValidation, "form validation failed", {"field '" + k + "': " + e.what()});
    }
    if (task && std::holds_alternative<std::string>(value)) {
      for (const auto& f : task->form_fields) {
        if (f.name == k && f.type == ValueType::kDocument) value = DocumentRef{std::get<std::string>(value)};
      }
    }
    out[k] = std::move(value);
  }
  return out;
}

// ---- handlers -----------------------------------------------------------------

using Handler = Response (*)(Platform&, const ServiceConfig&, Ctx&);

Response health(Platform& p, const ServiceConfig&, Ctx&) {
  return json_response(200, {{"status", "ok"}, {"journal_length", p.journal_length()}, {"now", format_timestamp(p.clock().now())}});
}

Response me(Platform& p, const ServiceConfig&, Ctx& c) {
  json roles = json::array();
  for (Role r : c.user->roles) roles.push_back(to_string(r));
  json contacts = json::array();
  p.read([&](const RuntimeState& s) {
    if (auto it = s.contacts.find(c.user->id); it != s.contacts.end()) {
      for (const auto& ct : it->second) contacts.push_back({{"name", ct.name}, {"address", ct.address}});
    }
  });
  return json_response(200, {{"id", c.user->id},
                             {"name", c.user->name},
                             {"roles", roles},
                             {"groups", c.user->groups},
                             {"contacts", contacts}});
}

Response list_connectors(Platform& p, const ServiceConfig&, Ctx&) {
  json out = json::array();
  for (const auto* d : p.connectors().descriptors()) out.push_back(conn::to_json(*d));
  return json_response(200, out);
}

Response list_definitions(Platform& p, const ServiceConfig&, Ctx&) {
  return p.read([](const RuntimeState& s) {
    json out = json::array();
    for (const auto& [id, versions] : s.definitions) {
      const auto& d = versions.back();
      json timers = json::array();
      for (const auto* n : d.def->graph.start_events()) {
        if (n->timer) timers.push_back(n->timer->expression);
      }
      out.push_back({{"id", id},
                     {"name", d.name},
                     {"version", d.version},
                     {"deployed_at", format_timestamp(d.deployed_at)},
                     {"deployed_by", d.deployed_by},
                     {"timers", timers}});
    }
    return json_response(200, out);
  });
}

Response get_definition(Platform& p, const ServiceConfig&, Ctx& c) {
  return p.read([&](const RuntimeState& s) {
    const std::string& id = c.params.at("id");
    const engine::DeployedDefinition* d = nullptr;
    if (auto v = c.query.find("version"); v != c.query.end()) {
      int version = 0;
      try {
        version = std::stoi(v->second);
      } catch (const std::exception&) {
        fail(ErrorCode::kInvalidArgument, "version must be an integer");
      }
      d = s.find_definition(id, version);
    } else {
      d = s.latest(id);
    }
    if (!d) fail(ErrorCode::kNotFound, "unknown definition '" + id + "'");
    json out = graph_json(d->def->graph);
    out["id"] = d->id;
    out["name"] = d->name;
    out["version"] = d->version;
    out["deployed_at"] = format_timestamp(d->deployed_at);
    if (c.query.count("xml")) out["xml"] = d->xml;
    return json_response(200, out);
  });
}

Response deploy(Platform& p, const ServiceConfig&, Ctx& c) {
  std::string xml = c.req.body;
  if (auto it = c.req.parts.find("file"); it != c.req.parts.end()) xml = it->second.content;
  if (trim_view(xml).empty()) fail(ErrorCode::kInvalidArgument, "no BPMN XML in the request");
  const DeployResult r = p.deploy(xml, c.user->id);
  return json_response(201, {{"id", r.id}, {"version", r.version}, {"name", r.name}});
}

Response start_instance(Platform& p, const ServiceConfig&, Ctx& c) {
  const json b = body_json(c);
  if (!b.contains("definition") || !b["definition"].is_string()) fail(ErrorCode::kInvalidArgument, "'definition' is required");
  const VariableMap vars = b.contains("variables") ? form_values(b["variables"], nullptr) : VariableMap{};
  const std::string id = p.start(b["definition"].get<std::string>(), vars, c.user->id);
  return p.read([&](const RuntimeState& s) { return json_response(201, instance_summary(s, s.instances.at(id))); });
}

Response get_instance(Platform& p, const ServiceConfig&, Ctx& c) {
  return p.read([&](const RuntimeState& s) {
    auto it = s.instances.find(c.params.at("id"));
    if (it == s.instances.end()) fail(ErrorCode::kNotFound, "unknown instance '" + c.params.at("id") + "'");
    if (!manager(c.actor) && !owns_work_in(s, it->second, c.actor)) {
      fail(ErrorCode::kForbidden, "instance is outside your monitor scope");
    }
    json out = instance_summary(s, it->second);
    out["variables"] = to_json(it->second.variables);
    return json_response(200, out);
  });
}

Response terminate_instance(Platform& p, const ServiceConfig&, Ctx& c) {
  const json b = body_json(c);
  p.terminate(c.params.at("id"), b.value("reason", "terminated by " + c.user->id), c.user->id);
  return p.read([&](const RuntimeState& s) { return json_response(200, instance_summary(s, s.instances.at(c.params.at("id")))); });
}

Response list_tasks(Platform& p, const ServiceConfig&, Ctx& c) {
  return p.read([&](const RuntimeState& s) {
    json out = json::array();
    for (const auto& [id, t] : s.tasks) {
      if (t.pending() && engine::Engine::may_work_on(t, c.actor)) out.push_back(task_json(s, t));
    }
    return json_response(200, out);
  });
}

const UserTask& authorized_task(const RuntimeState& s, const Ctx& c) {
  auto it = s.tasks.find(c.params.at("id"));
  if (it == s.tasks.end()) fail(ErrorCode::kNotFound, "unknown task '" + c.params.at("id") + "'");
  if (!engine::Engine::may_work_on(it->second, c.actor)) {
    fail(ErrorCode::kForbidden, "task " + it->first + " requires role " +
                                    (it->second.candidate_role ? to_string(*it->second.candidate_role) : "assignee"));
  }
  return it->second;
}

Response get_task(Platform& p, const ServiceConfig&, Ctx& c) {
  return p.read([&](const RuntimeState& s) {
    auto it = s.tasks.find(c.params.at("id"));
    if (it == s.tasks.end()) fail(ErrorCode::kNotFound, "unknown task '" + c.params.at("id") + "'");
    if (!manager(c.actor)) authorized_task(s, c);
    return json_response(200, task_json(s, it->second));
  });
}

Response claim_task(Platform& p, const ServiceConfig&, Ctx& c) {
  p.claim(c.params.at("id"), c.actor);
  return p.read([&](const RuntimeState& s) { return json_response(200, task_json(s, s.tasks.at(c.params.at("id")))); });
}

Response complete_task(Platform& p, const ServiceConfig&, Ctx& c) {
  const json b = body_json(c);
  const json values = b.contains("values") ? b["values"] : b;
  const VariableMap vars = p.read([&](const RuntimeState& s) {
    const UserTask& t = authorized_task(s, c);
    return form_values(values, &t);
  });
  p.complete(c.params.at("id"), vars, c.actor);
  return p.read([&](const RuntimeState& s) {
    const UserTask& t = s.tasks.at(c.params.at("id"));
    const Instance& inst = s.instances.at(t.instance_id);
    return json_response(200, {{"task", task_json(s, t)},
                               {"instance", {{"id", inst.id}, {"status", to_string(inst.status)}}}});
  });
}

Response list_notifications(Platform& p, const ServiceConfig&, Ctx& c) {
  const bool unread_only = c.query.count("unread") && c.query.at("unread") != "false";
  return p.read([&](const RuntimeState& s) {
    json items = json::array();
    std::size_t unread = 0;
    for (const auto& [id, n] : s.notifications) {
      if (!sees_notification(c.actor, n)) continue;
      unread += n.read ? 0 : 1;
      if (unread_only && n.read) continue;
      items.push_back(notification_json(n));
    }
    return json_response(200, {{"unread", unread}, {"items", items}});
  });
}

Response read_notification(Platform& p, const ServiceConfig&, Ctx& c) {
  p.read([&](const RuntimeState& s) { visible_notification(s, c); });
  p.mark_read(c.params.at("id"));
  return p.read([&](const RuntimeState& s) { return json_response(200, notification_json(s.notifications.at(c.params.at("id")))); });
}

Response forward_notification(Platform& p, const ServiceConfig&, Ctx& c) {
  p.read([&](const RuntimeState& s) { visible_notification(s, c); });
  const json b = body_json(c);
  std::vector<std::string> addresses;
  if (!b.contains("contacts") || !b["contacts"].is_array()) fail(ErrorCode::kInvalidArgument, "'contacts' must be a list");
  for (const json& x : b["contacts"]) {
    if (x.is_string()) {
      addresses.push_back(x.get<std::string>());
    } else if (x.is_object() && x.contains("address")) {
      addresses.push_back(x["address"].get<std::string>());
    } else {
      fail(ErrorCode::kInvalidArgument, "contacts are addresses or {name, address} objects");
    }
  }
  return json_response(200, notification_json(p.forward(c.params.at("id"), addresses, c.user->id)));
}

Response list_contacts(Platform& p, const ServiceConfig&, Ctx& c) {
  return p.read([&](const RuntimeState& s) {
    json out = json::array();
    if (auto it = s.contacts.find(c.user->id); it != s.contacts.end()) {
      for (const auto& ct : it->second) out.push_back({{"name", ct.name}, {"address", ct.address}});
    }
    return json_response(200, out);
  });
}

Response add_contact(Platform& p, const ServiceConfig&, Ctx& c) {
  const json b = body_json(c);
  p.add_contact(c.user->id, {b.value("name", ""), b.value("address", "")});
  return json_response(201, {{"name", b.value("name", "")}, {"address", b.value("address", "")}});
}

Response monitor(Platform& p, const ServiceConfig&, Ctx& c) {
  std::string scope = manager(c.actor) ? "all" : "mine";
  if (auto it = c.query.find("scope"); it != c.query.end()) scope = it->second;
  if (scope != "all" && scope != "mine") fail(ErrorCode::kInvalidArgument, "scope is 'all' or 'mine'");
  if (scope == "all" && !manager(c.actor)) fail(ErrorCode::kForbidden, "the all-instances monitor needs FarmManager or Agronomist");
  const std::string status = c.query.count("status") ? c.query.at("status") : "";
  return p.read([&](const RuntimeState& s) {
    json out = json::array();
    for (const auto& [id, inst] : s.instances) {
      if (scope == "mine" && !owns_work_in(s, inst, c.actor)) continue;
      if (!status.empty() && status != to_string(inst.status)) continue;
      out.push_back(instance_summary(s, inst));
    }
    return json_response(200, out);
  });
}

Response list_views(Platform& p, const ServiceConfig&, Ctx& c) {
  return p.read([&](const RuntimeState& s) {
    json out = json::array();
    if (auto it = s.views.find(c.user->id); it != s.views.end()) {
      for (const auto& [id, v] : it->second) out.push_back(view_json(v));
    }
    return json_response(200, out);
  });
}

Response view_catalog(Platform&, const ServiceConfig& cfg, Ctx&) {
  json out = json::array();
  for (const auto& src : cfg.catalog) {
    json e{{"id", src.id}, {"title", src.title}};
    e["embed_url"] = src.embed_url ? json(*src.embed_url) : json(nullptr);
    e["connector"] = src.connector ? json(*src.connector) : json(nullptr);
    out.push_back(std::move(e));
  }
  return json_response(200, out);
}

Response put_view(Platform& p, const ServiceConfig& cfg, Ctx& c) {
  const json b = body_json(c);
  engine::View v;
  v.id = c.params.at("id");
  v.title = b.value("title", v.id);
  std::vector<std::string> problems;
  for (const json& e : b.value("entries", json::array())) {
    const std::string source = e.is_object() ? e.value("source", "") : "";
    if (!cfg.source(source)) {
      problems.push_back("source '" + source + "' is not in the curated catalog");
      continue;
    }
    json params = e.value("params", json::object());
    if (!params.is_object()) {
      problems.push_back("params of '" + source + "' must be an object");
      continue;
    }
    v.entries.push_back({source, params});
  }
  if (!problems.empty()) fail(ErrorCode::kValidation, "invalid view", problems);
  p.put_view(c.user->id, v);
  return json_response(200, view_json(v));
}

Response delete_view(Platform& p, const ServiceConfig&, Ctx& c) {
  p.delete_view(c.user->id, c.params.at("id"));
  return json_response(200, {{"deleted", c.params.at("id")}});
}

Response upload_file(Platform& p, const ServiceConfig&, Ctx& c) {
  std::string kind, content;
  json metadata = json::object();
  std::optional<std::string> instance;
  if (!c.req.parts.empty()) {
    auto part = [&](const char* name) -> const FormPart* {
      auto it = c.req.parts.find(name);
      return it == c.req.parts.end() ? nullptr : &it->second;
    };
    if (const auto* k = part("kind")) kind = std::string(trim_view(k->content));
    if (const auto* f = part("file")) content = f->content;
    else fail(ErrorCode::kInvalidArgument, "multipart field 'file' is required");
    if (const auto* m = part("metadata"); m && !trim_view(m->content).empty()) {
      try {
        metadata = json::parse(m->content);
      } catch (const json::parse_error&) {
        fail(ErrorCode::kInvalidArgument, "metadata must be a JSON object");
      }
    }
    if (const auto* i = part("instance"); i && !trim_view(i->content).empty()) instance = std::string(trim_view(i->content));
  } else {
    const json b = body_json(c);
    kind = b.value("kind", "");
    content = b.value("content", "");
    metadata = b.value("metadata", json::object());
    if (b.contains("instance") && b["instance"].is_string()) instance = b["instance"].get<std::string>();
  }
  if (kind.empty()) fail(ErrorCode::kInvalidArgument, "'kind' is required");
  if (!metadata.is_object()) fail(ErrorCode::kInvalidArgument, "metadata must be a JSON object");
  const IngestResult r = p.ingest_file(kind, content, metadata, c.user->id, instance);
  return json_response(r.duplicate ? 200 : 201, {{"document", r.document.id},
                                                 {"kind", kind},
                                                 {"variables", to_json(r.variables)},
                                                 {"duplicate", r.duplicate}});
}

Response get_file(Platform& p, const ServiceConfig&, Ctx& c) {
  return p.read([&](const RuntimeState& s) {
    auto it = s.documents.find(c.params.at("id"));
    if (it == s.documents.end()) fail(ErrorCode::kNotFound, "unknown document '" + c.params.at("id") + "'");
    const auto& d = it->second;
    return json_response(200, {{"document", d.id},
                               {"kind", d.kind},
                               {"metadata", d.metadata},
                               {"variables", to_json(d.variables)},
                               {"uploaded_by", d.uploaded_by},
                               {"instance_id", d.instance_id ? json(*d.instance_id) : json(nullptr)},
                               {"ingested_at", format_timestamp(d.ingested_at)},
                               {"size", d.content.size()}});
  });
}

Response get_file_content(Platform& p, const ServiceConfig&, Ctx& c) {
  return p.read([&](const RuntimeState& s) {
    auto it = s.documents.find(c.params.at("id"));
    if (it == s.documents.end()) fail(ErrorCode::kNotFound, "unknown document '" + c.params.at("id") + "'");
    return Response{200, "text/plain; charset=utf-8", it->second.content};
  });
}

geo::RenderedMap render_map(Platform& p, Ctx& c) {
  const auto kind = geo::parse_index_kind(c.params.at("index"));
  if (!kind) fail(ErrorCode::kInvalidArgument, "unknown index '" + c.params.at("index") + "' (NDVI, NDMI, OSAVI)");
  geo::RenderMode mode = geo::RenderMode::kParcel;
  if (auto it = c.query.find("mode"); it != c.query.end()) {
    if (it->second == "cell") mode = geo::RenderMode::kCell;
    else if (it->second != "parcel") fail(ErrorCode::kInvalidArgument, "mode is 'parcel' or 'cell'");
  }
  int scale = 8;
  if (auto it = c.query.find("scale"); it != c.query.end()) {
    try {
      scale = std::stoi(it->second);
    } catch (const std::exception&) {
      scale = 0;
    }
    if (scale < 1 || scale > 64) fail(ErrorCode::kInvalidArgument, "scale must be in [1, 64]");
  }
  const std::string content = p.read([&](const RuntimeState& s) {
    auto it = s.instances.find(c.params.at("instance"));
    if (it == s.instances.end()) fail(ErrorCode::kNotFound, "unknown instance '" + c.params.at("instance") + "'");
    auto v = it->second.variables.find("satellite_scene");
    if (v == it->second.variables.end() || !std::holds_alternative<DocumentRef>(v->second)) {
      fail(ErrorCode::kNotFound, "instance " + it->first + " has no satellite analysis yet");
    }
    auto d = s.documents.find(std::get<DocumentRef>(v->second).id);
    if (d == s.documents.end()) fail(ErrorCode::kNotFound, "satellite scene document is missing");
    return d->second.content;
  });
  const geo::BandRaster scene = geo::parse_raster(content);
  return geo::render_color_map(scene, geo::compute_index(scene, *kind), *kind, mode, scale);
}

Response get_map(Platform& p, const ServiceConfig&, Ctx& c) {
  const geo::RenderedMap m = render_map(p, c);
  return Response{200, "image/x-portable-pixmap", geo::encode_ppm(m.image)};
}

Response get_map_legend(Platform& p, const ServiceConfig&, Ctx& c) {
  json legend = render_map(p, c).legend;
  legend["instance_id"] = c.params.at("instance");
  return json_response(200, legend);
}

Response history(Platform& p, const ServiceConfig&, Ctx& c) {
  store::HistoryFilter f;
  if (auto it = c.query.find("instance"); it != c.query.end()) f.instance_id = it->second;
  if (auto it = c.query.find("kind"); it != c.query.end()) {
    f.kind = store::parse_event_kind(it->second);
    if (!f.kind) fail(ErrorCode::kInvalidArgument, "unknown event kind '" + it->second + "'");
  }
  auto time_param = [&](const char* name) -> std::optional<Timestamp> {
    auto it = c.query.find(name);
    if (it == c.query.end()) return std::nullopt;
    auto t = parse_timestamp(it->second);
    if (!t) fail(ErrorCode::kInvalidArgument, std::string(name) + " is not a timestamp");
    return t;
  };
  f.from = time_param("from");
  f.to = time_param("to");
  if (auto it = c.query.find("action"); it != c.query.end()) f.payload_equals.emplace_back("values.action", it->second);
  if (auto it = c.query.find("connector"); it != c.query.end()) f.payload_equals.emplace_back("connector", it->second);
  if (auto it = c.query.find("last"); it != c.query.end()) {
    try {
      f.last = static_cast<std::size_t>(std::stoul(it->second));
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidArgument, "last must be a count");
    }
  }
  json out = json::array();
  for (const auto& r : p.history(f)) {
    out.push_back({{"seq", r.sequence_no},
                   {"kind", store::to_string(r.kind)},
                   {"instance", r.instance_id ? json(*r.instance_id) : json(nullptr)},
                   {"at", format_timestamp(r.at)},
                   {"payload", r.payload}});
  }
  return json_response(200, out);
}

struct Route {
  RouteSpec spec;
  Handler handler;
};

const std::vector<Route>& routes() {
  static const std::vector<Route> table = {
      {{"GET", "/health", {}, false, true}, health},
      {{"GET", "/me", {}, false}, me},
      {{"GET", "/connectors", {}, false}, list_connectors},
      {{"GET", "/definitions", {}, false}, list_definitions},
      {{"GET", "/definitions/{id}", {}, false}, get_definition},
      {{"POST", "/definitions", kManagers, true}, deploy},
      {{"POST", "/instances", kManagers, true}, start_instance},
      {{"GET", "/instances/{id}", kMonitor, false}, get_instance},
      {{"POST", "/instances/{id}/terminate", {Role::kFarmManager}, true}, terminate_instance},
      {{"GET", "/tasks", {}, false}, list_tasks},
      {{"GET", "/tasks/{id}", {}, false}, get_task},
      {{"POST", "/tasks/{id}/claim", {}, true}, claim_task},
      {{"POST", "/tasks/{id}/complete", {}, true}, complete_task},
      {{"GET", "/notifications", {}, false}, list_notifications},
      {{"POST", "/notifications/{id}/read", {}, true}, read_notification},
      {{"POST", "/notifications/{id}/forward", {}, true}, forward_notification},
      {{"GET", "/contacts", {}, false}, list_contacts},
      {{"POST", "/contacts", {}, true}, add_contact},
      {{"GET", "/monitor/processes", kMonitor, false}, monitor},
      {{"GET", "/views", {}, false}, list_views},
      {{"GET", "/views/catalog", {}, false}, view_catalog},
      {{"PUT", "/views/{id}", {}, true}, put_view},
      {{"DELETE", "/views/{id}", {}, true}, delete_view},
      {{"POST", "/files", kUploaders, true}, upload_file},
      {{"GET", "/files/{id}", {}, false}, get_file},
      {{"GET", "/files/{id}/content", {}, false}, get_file_content},
      {{"GET", "/maps/{instance}/{index}", kMapViewers, false}, get_map},
      {{"GET", "/maps/{instance}/{index}/legend", kMapViewers, false}, get_map_legend},
      {{"GET", "/history", kManagers, false}, history},
  };
  return table;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '/') {
      ++i;
      continue;
    }
    std::size_t j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    out.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string url_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%' && i + 2 < s.size() && std::isxdigit(static_cast<unsigned char>(s[i + 1])) &&
               std::isxdigit(static_cast<unsigned char>(s[i + 2]))) {
      out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}

bool match(const std::vector<std::string>& pattern, const std::vector<std::string>& path,
           std::map<std::string, std::string>& params) {
  if (pattern.size() != path.size()) return false;
  std::map<std::string, std::string> found;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const std::string& p = pattern[i];
    if (p.size() > 2 && p.front() == '{' && p.back() == '}') {
      found[p.substr(1, p.size() - 2)] = url_decode(path[i]);
    } else if (p != path[i]) {
      return false;
    }
  }
  params = std::move(found);
  return true;
}

Response error_response(const Error& e) {
  return json_response(http_status(e.code()), error_envelope(to_string(e.code()), e.what(), e.details()));
}

}  // namespace

const std::vector<RouteSpec>& route_table() {
  static const std::vector<RouteSpec> specs = [] {
    std::vector<RouteSpec> out;
    for (const auto& r : routes()) out.push_back(r.spec);
    return out;
  }();
  return specs;
}

Router::Router(Platform& platform, const ServiceConfig& config) : platform_(platform), config_(config) {}

Response Router::handle(const Request& request) const {
  std::string_view target = request.target;
  std::map<std::string, std::string> query = request.query;
  if (auto q = target.find('?'); q != std::string_view::npos) {
    std::string_view qs = target.substr(q + 1);
    target = target.substr(0, q);
    while (!qs.empty()) {
      const std::size_t amp = qs.find('&');
      const std::string_view pair = qs.substr(0, amp);
      const std::size_t eq = pair.find('=');
      const std::string key = url_decode(pair.substr(0, eq));
      if (!key.empty()) query[key] = eq == std::string_view::npos ? "" : url_decode(pair.substr(eq + 1));
      if (amp == std::string_view::npos) break;
      qs.remove_prefix(amp + 1);
    }
  }

  const std::string_view prefix = kApiPrefix;
  if (target.substr(0, prefix.size()) != prefix) {
    return json_response(404, error_envelope("not_found", "no such endpoint; the API lives under " + std::string(prefix)));
  }
  const auto path = split_path(target.substr(prefix.size()));

  const Route* route = nullptr;
  bool path_known = false;
  std::map<std::string, std::string> params;
  for (const auto& r : routes()) {
    std::map<std::string, std::string> p;
    if (!match(split_path(r.spec.pattern), path, p)) continue;
    path_known = true;
    if (r.spec.method == request.method) {
      route = &r;
      params = std::move(p);
      break;
    }
  }
  if (!route) {
    return path_known ? json_response(405, error_envelope("method_not_allowed", request.method + " is not supported here"))
                      : json_response(404, error_envelope("not_found", "no such endpoint"));
  }

  Ctx ctx{request, nullptr, {}, std::move(params), std::move(query)};
  if (!route->spec.public_route) {
    const std::string auth = request.header("Authorization");
    constexpr std::string_view kBearer = "Bearer ";
    const User* user = auth.rfind(kBearer, 0) == 0 ? config_.user_by_token(trim_view(auth.substr(kBearer.size()))) : nullptr;
    if (!user) {
      return json_response(401, error_envelope("unauthenticated", "missing or invalid bearer token"));
    }
    ctx.user = user;
    ctx.actor = Actor{user->id, user->roles};
    if (!route->spec.roles.empty()) {
      const bool allowed = std::any_of(route->spec.roles.begin(), route->spec.roles.end(),
                                       [&](Role r) { return user->roles.count(r) != 0; });
      if (!allowed) {
        std::vector<std::string> needed;
        for (Role r : route->spec.roles) needed.emplace_back(to_string(r));
        return json_response(403, error_envelope("forbidden", request.method + " " + route->spec.pattern +
                                                                  " is not available to your roles",
                                                 {"requires one of: " + [&] {
                                                   std::string s;
                                                   for (const auto& n : needed) s += (s.empty() ? "" : ", ") + n;
                                                   return s;
                                                 }()}));
      }
    }
  }

  try {
    return route->handler(platform_, config_, ctx);
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return json_response(500, error_envelope("internal_error", e.what()));
  }
}

}  // namespace agriflow::api
