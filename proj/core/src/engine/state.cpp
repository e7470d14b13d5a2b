#include "agriflow/engine/state.hpp"

#include <cstdio>

#include "agriflow/error.hpp"

namespace agriflow::engine {

using nlohmann::json;
using store::EventKind;
using store::EventRecord;

const char* to_string(InstanceStatus s) noexcept {
  switch (s) {
    case InstanceStatus::kRunning: return "Running";
    case InstanceStatus::kCompleted: return "Completed";
    case InstanceStatus::kTerminated: return "Terminated";
    case InstanceStatus::kFailed: return "Failed";
  }
  return "?";
}

const char* to_string(TaskState s) noexcept {
  switch (s) {
    case TaskState::kCreated: return "Created";
    case TaskState::kAssigned: return "Assigned";
    case TaskState::kCompleted: return "Completed";
    case TaskState::kCancelled: return "Cancelled";
  }
  return "?";
}

const char* to_string(JobKind k) noexcept { return k == JobKind::kServiceCall ? "service_call" : "timer_fire"; }

std::string format_id(const char* prefix, std::int64_t n) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s-%06lld", prefix, static_cast<long long>(n));
  return buf;
}

const DeployedDefinition* RuntimeState::latest(const std::string& definition_id) const {
  auto it = definitions.find(definition_id);
  if (it == definitions.end() || it->second.empty()) return nullptr;
  return &it->second.back();
}

const DeployedDefinition* RuntimeState::find_definition(const std::string& definition_id, int version) const {
  auto it = definitions.find(definition_id);
  if (it == definitions.end()) return nullptr;
  for (const auto& d : it->second) {
    if (d.version == version) return &d;
  }
  return nullptr;
}

const model::ProcessDefinition& RuntimeState::definition_of(const Instance& inst) const {
  const DeployedDefinition* d = find_definition(inst.definition_id, inst.version);
  if (!d) throw Error(ErrorCode::kStorage, "instance " + inst.id + " refers to an unknown definition version");
  return *d->def;
}

const model::ProcessGraph& RuntimeState::scope_graph(const Instance& inst, const std::string& scope) const {
  const model::ProcessDefinition& def = definition_of(inst);
  if (scope == kRootScope) return def.graph;
  auto it = inst.scopes.find(scope);
  if (it == inst.scopes.end()) throw Error(ErrorCode::kStorage, "unknown scope " + scope);
  const model::ProcessGraph* g = def.scope_graph(it->second.node);
  if (!g) throw Error(ErrorCode::kStorage, "scope " + scope + " is not a sub-process");
  return *g;
}

namespace {

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::kStorage, what); }

Timestamp ts(const json& j) {
  auto t = parse_timestamp(j.get<std::string>());
  if (!t) corrupt("bad timestamp " + j.dump());
  return *t;
}

Instance& instance_for(RuntimeState& s, const EventRecord& r) {
  if (!r.instance_id) corrupt(std::string(store::to_string(r.kind)) + " without instance");
  auto it = s.instances.find(*r.instance_id);
  if (it == s.instances.end()) corrupt("unknown instance " + *r.instance_id);
  return it->second;
}

Activity* find_activity(Instance& inst, const std::string& key) {
  for (auto& a : inst.activities) {
    if (a.key == key) return &a;
  }
  return nullptr;
}

void apply_move(RuntimeState& s, Instance& inst, const json& move) {
  for (const json& id : move.at("consume")) {
    if (inst.tokens.erase(id.get<std::int64_t>()) == 0) corrupt("consumed unknown token " + id.dump());
  }
  if (move.contains("close_scope")) {
    const std::string key = move["close_scope"].get<std::string>();
    if (inst.scopes.erase(key) == 0) corrupt("closed unknown scope " + key);
    if (Activity* a = find_activity(inst, key)) a->state = "completed";
  }
  if (move.contains("open_scope")) {
    const json& o = move["open_scope"];
    ScopeFrame f{o.at("key").get<std::string>(), o.at("node").get<std::string>(), o.at("parent").get<std::string>()};
    const model::FlowNode* node = s.definition_of(inst).find_node(f.node);
    if (!node || node->kind != model::NodeKind::kSubProcess) corrupt("scope on non-sub-process " + f.node);
    inst.activities.push_back(Activity{f.key, f.node, node->name, model::NodeKind::kSubProcess, "active"});
    inst.scopes.emplace(f.key, std::move(f));
  }
  for (const json& p : move.at("produce")) {
    Token t;
    t.id = p.at("id").get<std::int64_t>();
    t.node = p.at("node").get<std::string>();
    t.via = p.at("via").get<std::string>();
    t.scope = p.at("scope").get<std::string>();
    if (t.id != inst.next_token) corrupt("token id " + std::to_string(t.id) + " out of order");
    if (t.scope != kRootScope && !inst.scopes.count(t.scope)) corrupt("token in unknown scope " + t.scope);
    ++inst.next_token;
    inst.tokens.emplace(t.id, std::move(t));
  }
}

void end_instance(RuntimeState& s, Instance& inst, InstanceStatus status, Timestamp at, const std::string& reason) {
  inst.status = status;
  inst.ended_at = at;
  inst.failure = reason;
  inst.tokens.clear();
  inst.scopes.clear();
  for (auto& a : inst.activities) {
    if (a.state == "active") a.state = "cancelled";
  }
  for (auto& [id, task] : s.tasks) {
    if (task.instance_id == inst.id && task.pending()) task.state = TaskState::kCancelled;
  }
  for (auto it = s.jobs.begin(); it != s.jobs.end();) {
    if (it->second.instance_id == inst.id) {
      it = s.jobs.erase(it);
    } else {
      ++it;
    }
  }
}

std::vector<model::FormField> fields_from_json(const json& j) {
  std::vector<model::FormField> out;
  for (const json& f : j) {
    model::FormField ff;
    ff.name = f.at("name").get<std::string>();
    auto t = parse_value_type(f.at("type").get<std::string>());
    if (!t) corrupt("bad form field type");
    ff.type = *t;
    ff.required = f.at("required").get<bool>();
    ff.label = f.value("label", "");
    out.push_back(std::move(ff));
  }
  return out;
}

json fields_to_json(const std::vector<model::FormField>& fields) {
  json out = json::array();
  for (const auto& f : fields) {
    out.push_back({{"name", f.name}, {"type", to_string(f.type)}, {"required", f.required}, {"label", f.label}});
  }
  return out;
}

void merge(VariableMap& into, const VariableMap& from) {
  for (const auto& [k, v] : from) into[k] = v;
}

void apply_impl(RuntimeState& s, const EventRecord& r) {
  const json& p = r.payload;
  switch (r.kind) {
    case EventKind::kDefinitionDeployed: {
      DeployedDefinition d;
      d.id = p.at("definition_id").get<std::string>();
      d.version = p.at("version").get<int>();
      d.name = p.at("name").get<std::string>();
      d.xml = p.at("xml").get<std::string>();
      d.deployed_by = p.at("deployed_by").get<std::string>();
      d.deployed_at = r.at;
      auto& versions = s.definitions[d.id];
      const int expected = versions.empty() ? 1 : versions.back().version + 1;
      if (d.version != expected) corrupt("definition version out of order");
      auto parsed = std::make_shared<model::ProcessDefinition>(model::parse_definition(d.xml));
      if (parsed->id != d.id) corrupt("definition id mismatch");
      parsed->version = d.version;
      d.def = std::move(parsed);
      versions.push_back(std::move(d));
      break;
    }
    case EventKind::kInstanceStarted: {
      Instance inst;
      inst.id = p.at("instance_id").get<std::string>();
      if (inst.id != format_id("inst", s.instance_counter + 1)) corrupt("instance id out of order: " + inst.id);
      inst.definition_id = p.at("definition_id").get<std::string>();
      inst.version = p.at("version").get<int>();
      if (!s.find_definition(inst.definition_id, inst.version)) corrupt("instance of unknown definition");
      inst.trigger = p.at("trigger").get<std::string>();
      inst.started_by = p.at("started_by").get<std::string>();
      inst.variables = variables_from_json(p.at("variables"));
      inst.created_at = r.at;
      ++s.instance_counter;
      Instance& stored = s.instances.emplace(inst.id, std::move(inst)).first->second;
      apply_move(s, stored, p.at("move"));
      if (p.contains("timer_job")) {
        auto job = s.jobs.find(p["timer_job"].get<std::string>());
        if (job == s.jobs.end() || job->second.kind != JobKind::kTimerFire) corrupt("start by unknown timer job");
        if (p.at("rescheduled_due").is_null()) {
          s.jobs.erase(job);
        } else {
          const Timestamp next = ts(p["rescheduled_due"]);
          if (next <= job->second.due_at) corrupt("timer rescheduled into the past");
          job->second.due_at = next;
          if (job->second.remaining) --*job->second.remaining;
        }
      }
      break;
    }
    case EventKind::kTokenMoved: {
      Instance& inst = instance_for(s, r);
      apply_move(s, inst, p.at("move"));
      break;
    }
    case EventKind::kTaskCreated: {
      Instance& inst = instance_for(s, r);
      UserTask t;
      t.id = p.at("task_id").get<std::string>();
      if (t.id != format_id("task", s.task_counter + 1)) corrupt("task id out of order: " + t.id);
      t.instance_id = inst.id;
      t.node = p.at("node").get<std::string>();
      t.name = p.at("name").get<std::string>();
      t.token = p.at("token").get<std::int64_t>();
      if (!p.at("candidate_role").is_null()) {
        t.candidate_role = parse_role(p["candidate_role"].get<std::string>());
        if (!t.candidate_role) corrupt("bad candidate role");
      }
      t.form_fields = fields_from_json(p.at("form_fields"));
      t.display_variables = p.at("display").get<std::vector<std::string>>();
      t.created_at = r.at;
      auto tok = inst.tokens.find(t.token);
      if (tok == inst.tokens.end() || !tok->second.wait.empty()) corrupt("task on unavailable token");
      tok->second.wait = t.id;
      inst.activities.push_back(Activity{t.id, t.node, t.name, model::NodeKind::kUserTask, "active"});
      ++s.task_counter;
      s.tasks.emplace(t.id, std::move(t));
      break;
    }
    case EventKind::kTaskAssigned: {
      auto it = s.tasks.find(p.at("task_id").get<std::string>());
      if (it == s.tasks.end() || !it->second.pending()) corrupt("assignment of unavailable task");
      it->second.assignee = p.at("assignee").get<std::string>();
      it->second.state = TaskState::kAssigned;
      break;
    }
    case EventKind::kTaskCompleted: {
      Instance& inst = instance_for(s, r);
      auto it = s.tasks.find(p.at("task_id").get<std::string>());
      if (it == s.tasks.end() || !it->second.pending()) corrupt("completion of unavailable task");
      UserTask& t = it->second;
      t.state = TaskState::kCompleted;
      t.completed_at = r.at;
      t.completed_by = p.at("completed_by").get<std::string>();
      t.submitted_values = variables_from_json(p.at("values"));
      merge(inst.variables, t.submitted_values);
      if (p.contains("variables")) merge(inst.variables, variables_from_json(p["variables"]));
      if (Activity* a = find_activity(inst, t.id)) a->state = "completed";
      apply_move(s, inst, p.at("move"));
      break;
    }
    case EventKind::kVariableSet: {
      Instance& inst = instance_for(s, r);
      merge(inst.variables, variables_from_json(p.at("variables")));
      break;
    }
    case EventKind::kJobEnqueued: {
      Job j;
      j.id = p.at("job_id").get<std::string>();
      if (j.id != format_id("job", s.job_counter + 1)) corrupt("job id out of order: " + j.id);
      j.kind = p.at("kind").get<std::string>() == "timer_fire" ? JobKind::kTimerFire : JobKind::kServiceCall;
      j.due_at = ts(p.at("due_at"));
      j.max_attempts = p.at("max_attempts").get<int>();
      j.node = p.at("node").get<std::string>();
      if (j.kind == JobKind::kServiceCall) {
        Instance& inst = instance_for(s, r);
        j.instance_id = inst.id;
        j.token = p.at("token").get<std::int64_t>();
        j.connector = p.at("connector").get<std::string>();
        j.inputs = variables_from_json(p.at("inputs"));
        auto tok = inst.tokens.find(j.token);
        if (tok == inst.tokens.end() || !tok->second.wait.empty()) corrupt("job on unavailable token");
        tok->second.wait = j.id;
        const model::FlowNode* node = s.definition_of(inst).find_node(j.node);
        inst.activities.push_back(
            Activity{j.id, j.node, node ? node->name : j.node, model::NodeKind::kServiceTask, "active"});
      } else {
        j.definition_id = p.at("definition_id").get<std::string>();
        j.version = p.at("version").get<int>();
        j.timer = p.at("timer").get<std::string>();
        if (p.contains("remaining")) j.remaining = p["remaining"].get<std::int64_t>();
      }
      ++s.job_counter;
      s.jobs.emplace(j.id, std::move(j));
      break;
    }
    case EventKind::kJobCompleted: {
      auto it = s.jobs.find(p.at("job_id").get<std::string>());
      if (it == s.jobs.end()) corrupt("completion of unknown job");
      Job& j = it->second;
      if (j.kind == JobKind::kServiceCall) {
        Instance& inst = instance_for(s, r);
        if (j.instance_id != inst.id) corrupt("job completed on a foreign instance");
        merge(inst.variables, variables_from_json(p.at("variables")));
        if (Activity* a = find_activity(inst, j.id)) a->state = "completed";
        auto tok = inst.tokens.find(j.token);
        if (tok == inst.tokens.end() || tok->second.wait != j.id) corrupt("job token missing");
        apply_move(s, inst, p.at("move"));
      }
      s.jobs.erase(it);
      break;
    }
    case EventKind::kJobFailed: {
      auto it = s.jobs.find(p.at("job_id").get<std::string>());
      if (it == s.jobs.end()) corrupt("failure of unknown job");
      Job& j = it->second;
      j.attempts = p.at("attempt").get<int>();
      j.last_error = p.at("error").get<std::string>();
      if (p.contains("next_due")) {
        const Timestamp next = ts(p["next_due"]);
        if (next < j.due_at) corrupt("retry scheduled before previous attempt");
        j.due_at = next;
      } else {
        j.exhausted = true;
      }
      break;
    }
    case EventKind::kJobCancelled: {
      if (s.jobs.erase(p.at("job_id").get<std::string>()) == 0) corrupt("cancellation of unknown job");
      break;
    }
    case EventKind::kInstanceCompleted: {
      Instance& inst = instance_for(s, r);
      apply_move(s, inst, p.at("move"));
      if (!inst.tokens.empty()) corrupt("instance completed with live tokens");
      inst.status = InstanceStatus::kCompleted;
      inst.ended_at = r.at;
      break;
    }
    case EventKind::kInstanceFailed: {
      Instance& inst = instance_for(s, r);
      if (inst.status != InstanceStatus::kRunning) corrupt("failure of a finished instance");
      end_instance(s, inst, InstanceStatus::kFailed, r.at, p.at("reason").get<std::string>());
      break;
    }
    case EventKind::kInstanceTerminated: {
      Instance& inst = instance_for(s, r);
      if (inst.status != InstanceStatus::kRunning) corrupt("termination of a finished instance");
      end_instance(s, inst, InstanceStatus::kTerminated, r.at, p.at("reason").get<std::string>());
      break;
    }
    case EventKind::kNotificationEmitted: {
      const std::string id = p.at("notification_id").get<std::string>();
      if (p.contains("forwarded_to")) {
        auto it = s.notifications.find(id);
        if (it == s.notifications.end()) corrupt("forward of unknown notification");
        for (const json& c : p["forwarded_to"]) {
          Contact contact{c.at("name").get<std::string>(), c.at("address").get<std::string>()};
          auto& list = it->second.forwarded_to;
          if (std::find(list.begin(), list.end(), contact) == list.end()) list.push_back(std::move(contact));
        }
        break;
      }
      if (id != format_id("ntf", s.notification_counter + 1)) corrupt("notification id out of order: " + id);
      Notification n;
      n.id = id;
      n.recipient_role = p.at("recipient_role").get<std::string>();
      n.severity = p.at("severity").get<std::string>();
      n.body = p.at("body").get<std::string>();
      n.source = p.at("source").get<std::string>();
      n.event = p.at("event").get<std::string>();
      n.instance_id = r.instance_id;
      if (p.contains("job")) n.source_job = p["job"].get<std::string>();
      n.created_at = r.at;
      ++s.notification_counter;
      s.notifications.emplace(id, std::move(n));
      break;
    }
    case EventKind::kNotificationRead: {
      auto it = s.notifications.find(p.at("notification_id").get<std::string>());
      if (it == s.notifications.end()) corrupt("read of unknown notification");
      it->second.read = true;
      break;
    }
    case EventKind::kFileIngested: {
      Document d;
      d.id = p.at("document").get<std::string>();
      if (s.documents.count(d.id)) corrupt("document ingested twice");
      d.kind = p.at("kind").get<std::string>();
      d.content = p.at("content").get<std::string>();
      d.metadata = p.at("metadata");
      d.variables = variables_from_json(p.at("variables"));
      d.uploaded_by = p.at("uploaded_by").get<std::string>();
      d.instance_id = r.instance_id;
      d.ingested_at = r.at;
      s.documents.emplace(d.id, std::move(d));
      break;
    }
    case EventKind::kViewUpdated: {
      const std::string user = p.at("user").get<std::string>();
      const std::string view_id = p.at("view_id").get<std::string>();
      if (p.value("deleted", false)) {
        s.views[user].erase(view_id);
        break;
      }
      View v;
      v.id = view_id;
      v.title = p.at("title").get<std::string>();
      for (const json& e : p.at("entries")) {
        v.entries.push_back(ViewEntry{e.at("source").get<std::string>(), e.at("params")});
      }
      s.views[user][view_id] = std::move(v);
      break;
    }
    case EventKind::kContactAdded: {
      auto& list = s.contacts[p.at("user").get<std::string>()];
      Contact c{p.at("name").get<std::string>(), p.at("address").get<std::string>()};
      for (const auto& existing : list) {
        if (existing.address == c.address) corrupt("duplicate contact address");
      }
      list.push_back(std::move(c));
      break;
    }
  }
}

}  // namespace

void apply(RuntimeState& state, const EventRecord& record) {
  if (record.sequence_no != state.last_sequence + 1) {
    corrupt("record " + std::to_string(record.sequence_no) + " does not follow " +
            std::to_string(state.last_sequence));
  }
  try {
    apply_impl(state, record);
  } catch (const json::exception& e) {
    corrupt(std::string("malformed ") + store::to_string(record.kind) + " payload: " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kStorage) throw;
    corrupt(std::string(store::to_string(record.kind)) + ": " + e.what());
  }
  state.last_sequence = record.sequence_no;
  state.last_event_at = record.at;
}

// ---------------------------------------------------------------------------
// Canonical form

namespace {

json opt(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }
json opt_ts(const std::optional<Timestamp>& t) { return t ? json(format_timestamp(*t)) : json(nullptr); }
std::optional<std::string> opt_str(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<std::string>(j.get<std::string>());
}
std::optional<Timestamp> opt_time(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<Timestamp>(ts(j));
}

template <typename E>
E enum_from(const json& j, std::initializer_list<E> all) {
  const std::string s = j.get<std::string>();
  for (E e : all) {
    if (s == to_string(e)) return e;
  }
  corrupt("bad enum value " + s);
}

}  // namespace

json canonical(const RuntimeState& s) {
  json out = json::object();

  json defs = json::object();
  for (const auto& [id, versions] : s.definitions) {
    json list = json::array();
    for (const auto& d : versions) {
      list.push_back({{"version", d.version}, {"name", d.name}, {"xml", d.xml}, {"deployed_by", d.deployed_by},
                      {"deployed_at", format_timestamp(d.deployed_at)}});
    }
    defs[id] = std::move(list);
  }
  out["definitions"] = std::move(defs);

  json instances = json::object();
  for (const auto& [id, inst] : s.instances) {
    json tokens = json::array();
    for (const auto& [tid, t] : inst.tokens) {
      tokens.push_back({{"id", t.id}, {"node", t.node}, {"via", t.via}, {"scope", t.scope}, {"wait", t.wait}});
    }
    json scopes = json::object();
    for (const auto& [key, f] : inst.scopes) scopes[key] = {{"node", f.node}, {"parent", f.parent}};
    json acts = json::array();
    for (const auto& a : inst.activities) {
      acts.push_back({{"key", a.key}, {"node", a.node}, {"name", a.name}, {"kind", model::to_string(a.kind)},
                      {"state", a.state}});
    }
    instances[id] = {{"definition_id", inst.definition_id},
                     {"version", inst.version},
                     {"status", to_string(inst.status)},
                     {"trigger", inst.trigger},
                     {"started_by", inst.started_by},
                     {"created_at", format_timestamp(inst.created_at)},
                     {"ended_at", opt_ts(inst.ended_at)},
                     {"tokens", std::move(tokens)},
                     {"next_token", inst.next_token},
                     {"scopes", std::move(scopes)},
                     {"variables", to_json(inst.variables)},
                     {"activities", std::move(acts)},
                     {"failure", inst.failure}};
  }
  out["instances"] = std::move(instances);

  json tasks = json::object();
  for (const auto& [id, t] : s.tasks) {
    tasks[id] = {{"instance_id", t.instance_id},
                 {"node", t.node},
                 {"name", t.name},
                 {"token", t.token},
                 {"candidate_role", t.candidate_role ? json(to_string(*t.candidate_role)) : json(nullptr)},
                 {"form_fields", fields_to_json(t.form_fields)},
                 {"display", t.display_variables},
                 {"state", to_string(t.state)},
                 {"assignee", opt(t.assignee)},
                 {"created_at", format_timestamp(t.created_at)},
                 {"completed_at", opt_ts(t.completed_at)},
                 {"completed_by", opt(t.completed_by)},
                 {"submitted_values", to_json(t.submitted_values)}};
  }
  out["tasks"] = std::move(tasks);

  json jobs = json::object();
  for (const auto& [id, j] : s.jobs) {
    jobs[id] = {{"kind", to_string(j.kind)},
                {"due_at", format_timestamp(j.due_at)},
                {"attempts", j.attempts},
                {"max_attempts", j.max_attempts},
                {"exhausted", j.exhausted},
                {"last_error", j.last_error},
                {"instance_id", opt(j.instance_id)},
                {"node", j.node},
                {"token", j.token},
                {"connector", j.connector},
                {"inputs", to_json(j.inputs)},
                {"definition_id", j.definition_id},
                {"version", j.version},
                {"timer", j.timer},
                {"remaining", j.remaining ? json(*j.remaining) : json(nullptr)}};
  }
  out["jobs"] = std::move(jobs);

  json notes = json::object();
  for (const auto& [id, n] : s.notifications) {
    json fwd = json::array();
    for (const auto& c : n.forwarded_to) fwd.push_back({{"name", c.name}, {"address", c.address}});
    notes[id] = {{"recipient_role", n.recipient_role}, {"severity", n.severity}, {"body", n.body},
                 {"source", n.source},   {"event", n.event},         {"instance_id", opt(n.instance_id)},
                 {"source_job", opt(n.source_job)},
                 {"created_at", format_timestamp(n.created_at)},     {"forwarded_to", std::move(fwd)},
                 {"read", n.read}};
  }
  out["notifications"] = std::move(notes);

  json docs = json::object();
  for (const auto& [id, d] : s.documents) {
    docs[id] = {{"kind", d.kind},
                {"content", d.content},
                {"metadata", d.metadata},
                {"variables", to_json(d.variables)},
                {"uploaded_by", d.uploaded_by},
                {"instance_id", opt(d.instance_id)},
                {"ingested_at", format_timestamp(d.ingested_at)}};
  }
  out["documents"] = std::move(docs);

  json contacts = json::object();
  for (const auto& [user, list] : s.contacts) {
    json arr = json::array();
    for (const auto& c : list) arr.push_back({{"name", c.name}, {"address", c.address}});
    contacts[user] = std::move(arr);
  }
  out["contacts"] = std::move(contacts);

  json views = json::object();
  for (const auto& [user, by_id] : s.views) {
    json u = json::object();
    for (const auto& [vid, v] : by_id) {
      json entries = json::array();
      for (const auto& e : v.entries) entries.push_back({{"source", e.source}, {"params", e.params}});
      u[vid] = {{"title", v.title}, {"entries", std::move(entries)}};
    }
    views[user] = std::move(u);
  }
  out["views"] = std::move(views);

  out["counters"] = {{"instance", s.instance_counter},
                     {"task", s.task_counter},
                     {"job", s.job_counter},
                     {"notification", s.notification_counter}};
  out["last_sequence"] = s.last_sequence;
  out["last_event_at"] = format_timestamp(s.last_event_at);
  return out;
}

std::string canonical_text(const RuntimeState& state) { return canonical(state).dump(); }

RuntimeState state_from_canonical(const json& j) {
  RuntimeState s;
  try {
    for (const auto& [id, list] : j.at("definitions").items()) {
      for (const json& d : list) {
        DeployedDefinition dd;
        dd.id = id;
        dd.version = d.at("version").get<int>();
        dd.name = d.at("name").get<std::string>();
        dd.xml = d.at("xml").get<std::string>();
        dd.deployed_by = d.at("deployed_by").get<std::string>();
        dd.deployed_at = ts(d.at("deployed_at"));
        auto parsed = std::make_shared<model::ProcessDefinition>(model::parse_definition(dd.xml));
        parsed->version = dd.version;
        dd.def = std::move(parsed);
        s.definitions[id].push_back(std::move(dd));
      }
    }
    for (const auto& [id, i] : j.at("instances").items()) {
      Instance inst;
      inst.id = id;
      inst.definition_id = i.at("definition_id").get<std::string>();
      inst.version = i.at("version").get<int>();
      inst.status = enum_from<InstanceStatus>(i.at("status"), {InstanceStatus::kRunning, InstanceStatus::kCompleted,
                                                                InstanceStatus::kTerminated, InstanceStatus::kFailed});
      inst.trigger = i.at("trigger").get<std::string>();
      inst.started_by = i.at("started_by").get<std::string>();
      inst.created_at = ts(i.at("created_at"));
      inst.ended_at = opt_time(i.at("ended_at"));
      for (const json& t : i.at("tokens")) {
        Token tok{t.at("id").get<std::int64_t>(), t.at("node").get<std::string>(), t.at("via").get<std::string>(),
                  t.at("scope").get<std::string>(), t.at("wait").get<std::string>()};
        inst.tokens.emplace(tok.id, std::move(tok));
      }
      inst.next_token = i.at("next_token").get<std::int64_t>();
      for (const auto& [key, f] : i.at("scopes").items()) {
        inst.scopes.emplace(key, ScopeFrame{key, f.at("node").get<std::string>(), f.at("parent").get<std::string>()});
      }
      inst.variables = variables_from_json(i.at("variables"));
      for (const json& a : i.at("activities")) {
        auto kind = model::parse_node_kind(a.at("kind").get<std::string>());
        if (!kind) corrupt("bad activity kind");
        inst.activities.push_back(Activity{a.at("key").get<std::string>(), a.at("node").get<std::string>(),
                                           a.at("name").get<std::string>(), *kind, a.at("state").get<std::string>()});
      }
      inst.failure = i.at("failure").get<std::string>();
      s.instances.emplace(id, std::move(inst));
    }
    for (const auto& [id, t] : j.at("tasks").items()) {
      UserTask task;
      task.id = id;
      task.instance_id = t.at("instance_id").get<std::string>();
      task.node = t.at("node").get<std::string>();
      task.name = t.at("name").get<std::string>();
      task.token = t.at("token").get<std::int64_t>();
      if (!t.at("candidate_role").is_null()) task.candidate_role = parse_role(t["candidate_role"].get<std::string>());
      task.form_fields = fields_from_json(t.at("form_fields"));
      task.display_variables = t.at("display").get<std::vector<std::string>>();
      task.state = enum_from<TaskState>(
          t.at("state"), {TaskState::kCreated, TaskState::kAssigned, TaskState::kCompleted, TaskState::kCancelled});
      task.assignee = opt_str(t.at("assignee"));
      task.created_at = ts(t.at("created_at"));
      task.completed_at = opt_time(t.at("completed_at"));
      task.completed_by = opt_str(t.at("completed_by"));
      task.submitted_values = variables_from_json(t.at("submitted_values"));
      s.tasks.emplace(id, std::move(task));
    }
    for (const auto& [id, jb] : j.at("jobs").items()) {
      Job job;
      job.id = id;
      job.kind = enum_from<JobKind>(jb.at("kind"), {JobKind::kServiceCall, JobKind::kTimerFire});
      job.due_at = ts(jb.at("due_at"));
      job.attempts = jb.at("attempts").get<int>();
      job.max_attempts = jb.at("max_attempts").get<int>();
      job.exhausted = jb.at("exhausted").get<bool>();
      job.last_error = jb.at("last_error").get<std::string>();
      job.instance_id = opt_str(jb.at("instance_id"));
      job.node = jb.at("node").get<std::string>();
      job.token = jb.at("token").get<std::int64_t>();
      job.connector = jb.at("connector").get<std::string>();
      job.inputs = variables_from_json(jb.at("inputs"));
      job.definition_id = jb.at("definition_id").get<std::string>();
      job.version = jb.at("version").get<int>();
      job.timer = jb.at("timer").get<std::string>();
      if (!jb.at("remaining").is_null()) job.remaining = jb["remaining"].get<std::int64_t>();
      s.jobs.emplace(id, std::move(job));
    }
    for (const auto& [id, n] : j.at("notifications").items()) {
      Notification note;
      note.id = id;
      note.recipient_role = n.at("recipient_role").get<std::string>();
      note.severity = n.at("severity").get<std::string>();
      note.body = n.at("body").get<std::string>();
      note.source = n.at("source").get<std::string>();
      note.event = n.at("event").get<std::string>();
      note.instance_id = opt_str(n.at("instance_id"));
      note.source_job = opt_str(n.at("source_job"));
      note.created_at = ts(n.at("created_at"));
      for (const json& c : n.at("forwarded_to")) {
        note.forwarded_to.push_back(Contact{c.at("name").get<std::string>(), c.at("address").get<std::string>()});
      }
      note.read = n.at("read").get<bool>();
      s.notifications.emplace(id, std::move(note));
    }
    for (const auto& [id, d] : j.at("documents").items()) {
      Document doc;
      doc.id = id;
      doc.kind = d.at("kind").get<std::string>();
      doc.content = d.at("content").get<std::string>();
      doc.metadata = d.at("metadata");
      doc.variables = variables_from_json(d.at("variables"));
      doc.uploaded_by = d.at("uploaded_by").get<std::string>();
      doc.instance_id = opt_str(d.at("instance_id"));
      doc.ingested_at = ts(d.at("ingested_at"));
      s.documents.emplace(id, std::move(doc));
    }
    for (const auto& [user, list] : j.at("contacts").items()) {
      for (const json& c : list) {
        s.contacts[user].push_back(Contact{c.at("name").get<std::string>(), c.at("address").get<std::string>()});
      }
    }
    for (const auto& [user, by_id] : j.at("views").items()) {
      for (const auto& [vid, v] : by_id.items()) {
        View view;
        view.id = vid;
        view.title = v.at("title").get<std::string>();
        for (const json& e : v.at("entries")) {
          view.entries.push_back(ViewEntry{e.at("source").get<std::string>(), e.at("params")});
        }
        s.views[user][vid] = std::move(view);
      }
    }
    const json& c = j.at("counters");
    s.instance_counter = c.at("instance").get<std::int64_t>();
    s.task_counter = c.at("task").get<std::int64_t>();
    s.job_counter = c.at("job").get<std::int64_t>();
    s.notification_counter = c.at("notification").get<std::int64_t>();
    s.last_sequence = j.at("last_sequence").get<std::int64_t>();
    s.last_event_at = ts(j.at("last_event_at"));
  } catch (const json::exception& e) {
    corrupt(std::string("malformed snapshot: ") + e.what());
  }
  return s;
}

}  // namespace agriflow::engine
