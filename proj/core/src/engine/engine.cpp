#include "agriflow/engine/engine.hpp"

#include <algorithm>

#include "agriflow/error.hpp"

namespace agriflow::engine {

using model::FlowNode;
using model::NodeKind;
using model::ProcessGraph;
using model::SequenceFlow;
using nlohmann::json;
using store::EventKind;

namespace {

// Builds the "move" payload shared by token-advancing events. Produced token
// ids continue from the instance counter.
class Move {
 public:
  explicit Move(const Instance& inst) : next_(inst.next_token) {}

  Move& consume(std::int64_t id) {
    consume_.push_back(id);
    return *this;
  }
  Move& produce(const std::string& node, const std::string& via, const std::string& scope) {
    produce_.push_back({{"id", next_++}, {"node", node}, {"via", via}, {"scope", scope}});
    return *this;
  }
  Move& open_scope(const std::string& key, const std::string& node, const std::string& parent) {
    open_ = json{{"key", key}, {"node", node}, {"parent", parent}};
    return *this;
  }
  Move& close_scope(const std::string& key) {
    close_ = key;
    return *this;
  }
  json to_json() const {
    json m{{"consume", consume_}, {"produce", produce_}};
    if (!open_.is_null()) m["open_scope"] = open_;
    if (!close_.empty()) m["close_scope"] = close_;
    return m;
  }

 private:
  std::int64_t next_;
  std::vector<std::int64_t> consume_;
  json produce_ = json::array();
  json open_;
  std::string close_;
};

std::string scope_key(const std::string& node, std::int64_t token) { return node + "#" + std::to_string(token); }

}  // namespace

Engine::Engine(const RuntimeState& state, CommitFn commit, NowFn now, EngineOptions options)
    : state_(state), commit_(std::move(commit)), now_(std::move(now)), options_(options) {}

const Instance& Engine::instance(const std::string& id) const {
  auto it = state_.instances.find(id);
  if (it == state_.instances.end()) throw Error(ErrorCode::kNotFound, "unknown instance '" + id + "'");
  return it->second;
}

bool Engine::may_work_on(const UserTask& task, const Actor& actor) {
  if (task.assignee) return *task.assignee == actor.user_id;
  return !task.candidate_role || actor.has(*task.candidate_role);
}

int Engine::deploy(const model::ProcessDefinition& def, std::string_view xml, const std::string& user) {
  const DeployedDefinition* previous = state_.latest(def.id);
  const int version = previous ? previous->version + 1 : 1;
  commit_(EventKind::kDefinitionDeployed, std::nullopt,
          {{"definition_id", def.id}, {"version", version}, {"name", def.name}, {"xml", std::string(xml)},
           {"deployed_by", user}});

  // Only the newest version is triggered by timers.
  std::vector<std::string> stale;
  for (const auto& [id, job] : state_.jobs) {
    if (job.kind == JobKind::kTimerFire && job.definition_id == def.id) stale.push_back(id);
  }
  for (const auto& id : stale) {
    commit_(EventKind::kJobCancelled, std::nullopt, {{"job_id", id}, {"reason", "superseded by version " + std::to_string(version)}});
  }

  const Timestamp now = now_();
  for (const FlowNode* start : def.graph.start_events()) {
    if (!start->timer) continue;
    json payload{{"job_id", format_id("job", state_.job_counter + 1)},
                 {"kind", "timer_fire"},
                 {"max_attempts", 1},
                 {"node", start->id},
                 {"definition_id", def.id},
                 {"version", version},
                 {"timer", start->timer->expression}};
    if (start->timer->kind == model::TimerSpec::Kind::kCycle) {
      // First firing one full period after deployment.
      payload["due_at"] = format_timestamp(add_duration(now, start->timer->cycle.period));
      if (start->timer->cycle.repetitions) payload["remaining"] = *start->timer->cycle.repetitions;
    } else {
      payload["due_at"] = format_timestamp(start->timer->date);
      payload["remaining"] = 1;
    }
    commit_(EventKind::kJobEnqueued, std::nullopt, std::move(payload));
  }
  return version;
}

std::string Engine::start_instance(const std::string& definition_id, const VariableMap& vars, const std::string& user,
                                   const StartOptions& options) {
  const DeployedDefinition* d =
      options.version ? state_.find_definition(definition_id, *options.version) : state_.latest(definition_id);
  if (!d) throw Error(ErrorCode::kNotFound, "unknown definition '" + definition_id + "'");
  const model::ProcessDefinition& def = *d->def;

  std::vector<const FlowNode*> starts;
  if (options.start_node) {
    const FlowNode* n = def.graph.find_node(*options.start_node);
    if (!n || n->kind != NodeKind::kStartEvent) {
      throw Error(ErrorCode::kInvalidArgument, "'" + *options.start_node + "' is not a start event");
    }
    starts.push_back(n);
  } else {
    for (const FlowNode* n : def.graph.start_events()) {
      if (!n->timer) starts.push_back(n);
    }
    // A definition with only timer starts can still be started by hand.
    if (starts.empty()) starts = def.graph.start_events();
  }

  const Timestamp now = now_();
  VariableMap initial;
  initial["start_date"] = format_date(now);
  initial["start_time"] = format_timestamp(now);
  for (const auto& [k, v] : vars) initial[k] = v;

  const std::string id = format_id("inst", state_.instance_counter + 1);
  json produce = json::array();
  std::int64_t next = 1;
  for (const FlowNode* s : starts) {
    produce.push_back({{"id", next++}, {"node", s->id}, {"via", ""}, {"scope", kRootScope}});
  }
  json payload{{"instance_id", id},
               {"definition_id", def.id},
               {"version", d->version},
               {"variables", to_json(initial)},
               {"trigger", options.trigger},
               {"started_by", user},
               {"move", {{"consume", json::array()}, {"produce", std::move(produce)}}}};
  if (options.timer_job) {
    payload["timer_job"] = *options.timer_job;
    payload["rescheduled_due"] = options.rescheduled_due ? json(format_timestamp(*options.rescheduled_due)) : json(nullptr);
  }
  commit_(EventKind::kInstanceStarted, id, std::move(payload));
  run(id);
  return id;
}

std::string Engine::fire_timer(const std::string& job_id) {
  auto it = state_.jobs.find(job_id);
  if (it == state_.jobs.end()) throw Error(ErrorCode::kNotFound, "unknown job '" + job_id + "'");
  const Job& job = it->second;
  if (job.kind != JobKind::kTimerFire) throw Error(ErrorCode::kInvalidArgument, "job " + job_id + " is not a timer");
  const DeployedDefinition* d = state_.find_definition(job.definition_id, job.version);
  if (!d) throw Error(ErrorCode::kStorage, "timer job " + job_id + " refers to a missing definition");
  const FlowNode* start = d->def->graph.find_node(job.node);
  if (!start || !start->timer) throw Error(ErrorCode::kStorage, "timer job " + job_id + " has no timer start");

  StartOptions opts;
  opts.trigger = "timer";
  opts.version = job.version;
  opts.start_node = job.node;
  opts.timer_job = job_id;
  const bool more = start->timer->kind == model::TimerSpec::Kind::kCycle && (!job.remaining || *job.remaining > 1);
  if (more) opts.rescheduled_due = add_duration(job.due_at, start->timer->cycle.period);
  return start_instance(job.definition_id, {}, "scheduler", opts);
}

void Engine::claim_task(const std::string& task_id, const Actor& actor) {
  auto it = state_.tasks.find(task_id);
  if (it == state_.tasks.end()) throw Error(ErrorCode::kNotFound, "unknown task '" + task_id + "'");
  const UserTask& task = it->second;
  if (!may_work_on(task, actor)) throw Error(ErrorCode::kForbidden, "task " + task_id + " is not addressed to " + actor.user_id);
  if (!task.pending()) throw Error(ErrorCode::kConflict, "task " + task_id + " is " + to_string(task.state));
  if (task.assignee == actor.user_id) return;
  commit_(EventKind::kTaskAssigned, task.instance_id, {{"task_id", task_id}, {"assignee", actor.user_id}});
}

void Engine::complete_task(const std::string& task_id, const VariableMap& values, const Actor& actor) {
  auto it = state_.tasks.find(task_id);
  if (it == state_.tasks.end()) throw Error(ErrorCode::kNotFound, "unknown task '" + task_id + "'");
  const UserTask& task = it->second;
  if (!may_work_on(task, actor)) {
    throw Error(ErrorCode::kForbidden, "task " + task_id + " requires role " +
                                           (task.candidate_role ? to_string(*task.candidate_role) : "assignee"));
  }
  if (!task.pending()) throw Error(ErrorCode::kConflict, "task " + task_id + " is already " + to_string(task.state));

  // Form validation: closed field set, declared types, required fields.
  std::vector<std::string> problems;
  VariableMap accepted;
  VariableMap from_documents;
  for (const auto& [name, value] : values) {
    auto f = std::find_if(task.form_fields.begin(), task.form_fields.end(),
                          [&](const model::FormField& ff) { return ff.name == name; });
    if (f == task.form_fields.end()) {
      problems.push_back("field '" + name + "' is not part of the form");
      continue;
    }
    if (!conforms(value, f->type)) {
      problems.push_back("field '" + name + "' must be " + to_string(f->type) + ", got " + to_string(type_of(value)));
      continue;
    }
    Value v = value;
    if (f->type == ValueType::kDecimal && std::holds_alternative<std::int64_t>(v)) {
      v = static_cast<double>(std::get<std::int64_t>(v));
    }
    if (const auto* doc = std::get_if<DocumentRef>(&v)) {
      auto d = state_.documents.find(doc->id);
      if (d == state_.documents.end()) {
        problems.push_back("field '" + name + "' refers to unknown document " + doc->id);
        continue;
      }
      for (const auto& [k, dv] : d->second.variables) from_documents[k] = dv;
    }
    accepted[name] = std::move(v);
  }
  for (const auto& f : task.form_fields) {
    if (f.required && !values.count(f.name)) problems.push_back("required field '" + f.name + "' is missing");
  }
  if (!problems.empty()) throw Error(ErrorCode::kValidation, "form validation failed for task " + task_id, problems);

  const Instance& inst = instance(task.instance_id);
  const Token& token = inst.tokens.at(task.token);
  const ProcessGraph& g = state_.scope_graph(inst, token.scope);
  const SequenceFlow* out = g.outgoing(task.node).at(0);
  Move move(inst);
  move.consume(token.id).produce(out->target, out->id, token.scope);
  json payload{{"task_id", task_id},
               {"values", to_json(accepted)},
               {"completed_by", actor.user_id},
               {"move", move.to_json()}};
  if (!from_documents.empty()) payload["variables"] = to_json(from_documents);
  commit_(EventKind::kTaskCompleted, inst.id, std::move(payload));
  run(inst.id);
}

void Engine::complete_job(const std::string& job_id, const VariableMap& outputs) {
  auto it = state_.jobs.find(job_id);
  if (it == state_.jobs.end()) throw Error(ErrorCode::kNotFound, "unknown job '" + job_id + "'");
  const Job& job = it->second;
  if (job.kind != JobKind::kServiceCall || !job.instance_id) {
    throw Error(ErrorCode::kInvalidArgument, "job " + job_id + " is not a service call");
  }
  const Instance& inst = instance(*job.instance_id);
  const Token& token = inst.tokens.at(job.token);
  const ProcessGraph& g = state_.scope_graph(inst, token.scope);
  const FlowNode* node = g.find_node(job.node);

  VariableMap mapped;
  for (const auto& m : node->outputs) {
    auto o = outputs.find(m.name);
    if (o == outputs.end()) {
      fail_job(job_id, "connector '" + job.connector + "' returned no '" + m.name + "'");
      return;
    }
    mapped[m.variable] = o->second;
  }
  const SequenceFlow* out = g.outgoing(job.node).at(0);
  Move move(inst);
  move.consume(token.id).produce(out->target, out->id, token.scope);
  const std::string instance_id = inst.id;
  commit_(EventKind::kJobCompleted, instance_id,
          {{"job_id", job_id},
           {"connector", job.connector},
           {"attempt", job.attempts + 1},
           {"outputs", to_json(outputs)},
           {"variables", to_json(mapped)},
           {"move", move.to_json()}});
  run(instance_id);
}

void Engine::fail_job(const std::string& job_id, const std::string& error) {
  auto it = state_.jobs.find(job_id);
  if (it == state_.jobs.end()) throw Error(ErrorCode::kNotFound, "unknown job '" + job_id + "'");
  const Job& job = it->second;
  const int attempt = job.attempts + 1;
  json payload{{"job_id", job_id}, {"connector", job.connector}, {"attempt", attempt}, {"error", error}};
  if (attempt < job.max_attempts) {
    // Spacing between attempt k and k+1 is initial * 2^(k-1).
    const std::int64_t delay = options_.backoff_initial_seconds << (attempt - 1);
    payload["next_due"] = format_timestamp(job.due_at + std::chrono::seconds(delay));
    commit_(EventKind::kJobFailed, job.instance_id, std::move(payload));
    return;
  }
  payload["exhausted"] = true;
  commit_(EventKind::kJobFailed, job.instance_id, std::move(payload));
  fail_exhausted(job_id);
}

void Engine::fail_exhausted(const std::string& job_id) {
  auto it = state_.jobs.find(job_id);
  if (it == state_.jobs.end()) return;
  const Job& job = it->second;
  if (!job.instance_id) {
    commit_(EventKind::kJobCancelled, std::nullopt, {{"job_id", job_id}, {"reason", "attempts exhausted"}});
    return;
  }
  const Instance& inst = instance(*job.instance_id);
  fail_instance(inst,
                "connector '" + job.connector + "' failed after " + std::to_string(job.attempts) +
                    " attempts: " + job.last_error,
                job.node);
}

void Engine::terminate(const std::string& instance_id, const std::string& reason, const std::string& user) {
  const Instance& inst = instance(instance_id);
  if (inst.status != InstanceStatus::kRunning) {
    throw Error(ErrorCode::kConflict, "instance " + instance_id + " is " + to_string(inst.status));
  }
  commit_(EventKind::kInstanceTerminated, instance_id, {{"reason", reason}, {"by", user}});
}

void Engine::fail_instance(const Instance& inst, const std::string& reason, const std::string& node) {
  commit_(EventKind::kInstanceFailed, inst.id, {{"reason", reason}, {"node", node}});
}

void Engine::recover() {
  std::vector<std::string> exhausted;
  for (const auto& [id, job] : state_.jobs) {
    if (job.exhausted) exhausted.push_back(id);
  }
  for (const auto& id : exhausted) fail_exhausted(id);
  std::vector<std::string> running;
  for (const auto& [id, inst] : state_.instances) {
    if (inst.status == InstanceStatus::kRunning) running.push_back(id);
  }
  for (const auto& id : running) run(id);
}

void Engine::run(const std::string& instance_id) {
  for (int steps = 0;; ++steps) {
    const Instance& inst = instance(instance_id);
    if (inst.status != InstanceStatus::kRunning) return;
    if (steps >= options_.step_limit) {
      fail_instance(inst, "step limit of " + std::to_string(options_.step_limit) + " exceeded", "");
      return;
    }
    if (!step(inst)) return;
  }
}

bool Engine::join_ready(const Instance& inst, const Token& token, const ProcessGraph& g) const {
  for (const SequenceFlow* in : g.incoming(token.node)) {
    bool covered = false;
    for (const auto& [id, t] : inst.tokens) {
      if (t.node == token.node && t.scope == token.scope && t.wait.empty() && t.via == in->id) {
        covered = true;
        break;
      }
    }
    if (!covered) return false;
  }
  return true;
}

// Processes the lowest-id token that can move. Returns false at quiescence.
bool Engine::step(const Instance& inst) {
  for (const auto& [id, token] : inst.tokens) {
    if (!token.wait.empty()) continue;
    const ProcessGraph& g = state_.scope_graph(inst, token.scope);
    const FlowNode* node = g.find_node(token.node);
    if (!node) throw Error(ErrorCode::kStorage, "token at unknown node " + token.node);
    const auto outgoing = g.outgoing(node->id);
    const auto incoming = g.incoming(node->id);

    switch (node->kind) {
      case NodeKind::kStartEvent: {
        Move move(inst);
        move.consume(token.id).produce(outgoing.at(0)->target, outgoing.at(0)->id, token.scope);
        commit_(EventKind::kTokenMoved, inst.id, {{"node", node->id}, {"move", move.to_json()}});
        return true;
      }

      case NodeKind::kEndEvent: {
        Move move(inst);
        move.consume(token.id);
        if (token.scope == kRootScope) {
          if (inst.tokens.size() == 1) {
            commit_(EventKind::kInstanceCompleted, inst.id, {{"node", node->id}, {"move", move.to_json()}});
          } else {
            commit_(EventKind::kTokenMoved, inst.id, {{"node", node->id}, {"move", move.to_json()}});
          }
          return true;
        }
        bool last_in_scope = true;
        for (const auto& [oid, other] : inst.tokens) {
          if (oid != token.id && other.scope == token.scope) last_in_scope = false;
        }
        if (last_in_scope) {
          // Leave the sub-process on its single outgoing flow.
          const ScopeFrame& frame = inst.scopes.at(token.scope);
          const ProcessGraph& parent = state_.scope_graph(inst, frame.parent);
          const SequenceFlow* out = parent.outgoing(frame.node).at(0);
          move.close_scope(frame.key).produce(out->target, out->id, frame.parent);
        }
        commit_(EventKind::kTokenMoved, inst.id, {{"node", node->id}, {"move", move.to_json()}});
        return true;
      }

      case NodeKind::kUserTask: {
        json fields = json::array();
        for (const auto& f : node->form_fields) {
          fields.push_back({{"name", f.name}, {"type", to_string(f.type)}, {"required", f.required}, {"label", f.label}});
        }
        commit_(EventKind::kTaskCreated, inst.id,
                {{"task_id", format_id("task", state_.task_counter + 1)},
                 {"node", node->id},
                 {"name", node->name.empty() ? node->id : node->name},
                 {"token", token.id},
                 {"candidate_role", node->candidate_role ? json(to_string(*node->candidate_role)) : json(nullptr)},
                 {"form_fields", std::move(fields)},
                 {"display", node->display_variables}});
        return true;
      }

      case NodeKind::kServiceTask: {
        VariableMap inputs;
        for (const auto& in : node->inputs) {
          if (in.variable) {
            auto v = inst.variables.find(*in.variable);
            if (v == inst.variables.end()) {
              fail_instance(inst,
                            "service task '" + node->id + "': input '" + in.name + "' needs unbound variable '" +
                                *in.variable + "'",
                            node->id);
              return true;
            }
            inputs[in.name] = v->second;
          } else if (in.literal) {
            inputs[in.name] = *in.literal;
          }
        }
        commit_(EventKind::kJobEnqueued, inst.id,
                {{"job_id", format_id("job", state_.job_counter + 1)},
                 {"kind", "service_call"},
                 {"due_at", format_timestamp(now_())},
                 {"max_attempts", options_.max_attempts},
                 {"node", node->id},
                 {"token", token.id},
                 {"connector", node->connector_ref},
                 {"inputs", to_json(inputs)}});
        return true;
      }

      case NodeKind::kExclusiveGateway: {
        const SequenceFlow* chosen = nullptr;
        for (const SequenceFlow* f : outgoing) {
          if (node->default_flow && f->id == *node->default_flow) continue;
          if (!f->condition) {
            chosen = f;
            break;
          }
          bool taken = false;
          try {
            taken = expr::eval_expr(*f->condition, inst.variables);
          } catch (const Error& e) {
            fail_instance(inst, "gateway '" + node->id + "', flow '" + f->id + "': " + e.what(), node->id);
            return true;
          }
          if (taken) {
            chosen = f;
            break;
          }
        }
        if (!chosen && node->default_flow) chosen = g.find_flow(*node->default_flow);
        if (!chosen) {
          fail_instance(inst, "no viable flow at gateway '" + node->id + "'", node->id);
          return true;
        }
        Move move(inst);
        move.consume(token.id).produce(chosen->target, chosen->id, token.scope);
        commit_(EventKind::kTokenMoved, inst.id,
                {{"node", node->id}, {"flow", chosen->id}, {"move", move.to_json()}});
        return true;
      }

      case NodeKind::kParallelGateway: {
        Move move(inst);
        if (incoming.size() <= 1) {
          move.consume(token.id);
        } else {
          if (!join_ready(inst, token, g)) continue;  // partial join waits
          for (const SequenceFlow* in : incoming) {
            for (const auto& [tid, t] : inst.tokens) {  // lowest id per incoming flow
              if (t.node == node->id && t.scope == token.scope && t.wait.empty() && t.via == in->id) {
                move.consume(tid);
                break;
              }
            }
          }
        }
        for (const SequenceFlow* out : outgoing) move.produce(out->target, out->id, token.scope);
        commit_(EventKind::kTokenMoved, inst.id, {{"node", node->id}, {"move", move.to_json()}});
        return true;
      }

      case NodeKind::kSubProcess: {
        const FlowNode* start = nullptr;
        for (const FlowNode* s : node->child->start_events()) {
          if (!s->timer) start = s;
        }
        if (!start) throw Error(ErrorCode::kStorage, "sub-process '" + node->id + "' has no plain start event");
        const std::string key = scope_key(node->id, token.id);
        Move move(inst);
        move.consume(token.id).open_scope(key, node->id, token.scope).produce(start->id, "", key);
        commit_(EventKind::kTokenMoved, inst.id, {{"node", node->id}, {"move", move.to_json()}});
        return true;
      }
    }
  }
  return false;
}

}  // namespace agriflow::engine
