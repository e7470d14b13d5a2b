#pragma once

// A bare engine over an in-memory state: no journal file, no scheduler, no
// connectors. Tests drive jobs by hand through complete_job / fail_job.

#include <vector>

#include "agriflow/engine/engine.hpp"
#include "agriflow/model/process_definition.hpp"

namespace agriflow::testkit {

class EngineHarness {
 public:
  explicit EngineHarness(engine::RuntimeState state = {}, engine::EngineOptions options = {})
      : state_(std::move(state)),
        commit_fn_([this](store::EventKind kind, std::optional<std::string> instance, nlohmann::json payload) {
          store::EventRecord r;
          r.sequence_no = state_.last_sequence + 1;
          r.kind = kind;
          r.instance_id = std::move(instance);
          r.payload = std::move(payload);
          r.at = now;
          engine::apply(state_, r);
          if (keep_records) records.push_back(std::move(r));
        }),
        engine_(state_, commit_fn_, [this] { return now; }, options) {}

  EngineHarness(const EngineHarness&) = delete;
  EngineHarness& operator=(const EngineHarness&) = delete;

  std::string deploy(std::string_view xml) {
    const model::ProcessDefinition def = model::parse_definition(xml);
    engine_.deploy(def, xml, "tester");
    return def.id;
  }

  void commit(store::EventKind kind, std::optional<std::string> instance, nlohmann::json payload) {
    commit_fn_(kind, std::move(instance), std::move(payload));
  }

  engine::Engine& engine() { return engine_; }
  const engine::RuntimeState& state() const { return state_; }
  const engine::Instance& instance(const std::string& id) const { return state_.instances.at(id); }

  std::vector<const engine::UserTask*> pending_tasks(const std::string& instance_id) const {
    std::vector<const engine::UserTask*> out;
    for (const auto& [id, t] : state_.tasks) {
      if (t.instance_id == instance_id && t.pending()) out.push_back(&t);
    }
    return out;
  }

  const engine::UserTask* pending_task_at(const std::string& instance_id, const std::string& node) const {
    for (const auto* t : pending_tasks(instance_id)) {
      if (t->node == node) return t;
    }
    return nullptr;
  }

  std::vector<const engine::Job*> pending_jobs(const std::string& instance_id) const {
    std::vector<const engine::Job*> out;
    for (const auto& [id, j] : state_.jobs) {
      if (j.instance_id == instance_id) out.push_back(&j);
    }
    return out;
  }

  /// Actor holding every role.
  static engine::Actor superuser() {
    engine::Actor a{"tester", {}};
    for (Role r : kAllRoles) a.roles.insert(r);
    return a;
  }

  Timestamp now = Timestamp{std::chrono::sys_days{std::chrono::year{2025} / 5 / 1}} + std::chrono::hours{6};
  bool keep_records = true;
  std::vector<store::EventRecord> records;

 private:
  engine::RuntimeState state_;
  engine::CommitFn commit_fn_;
  engine::Engine engine_;
};

}  // namespace agriflow::testkit
