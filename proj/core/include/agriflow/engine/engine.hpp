#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "agriflow/engine/state.hpp"
#include "agriflow/roles.hpp"
#include "agriflow/store/event_record.hpp"

namespace agriflow::engine {

/// The caller of an engine operation.
struct Actor {
  std::string user_id;
  std::set<Role> roles;
  bool has(Role r) const { return roles.count(r) != 0; }
};

struct EngineOptions {
  int max_attempts = 3;
  std::int64_t backoff_initial_seconds = 30;
  int step_limit = 100000;  // per run(); guards against condition loops with no wait state
};

/// Journals one event and applies it to the state the engine reads.
using CommitFn = std::function<void(store::EventKind, std::optional<std::string> instance_id, nlohmann::json payload)>;
using NowFn = std::function<Timestamp()>;

struct StartOptions {
  std::string trigger = "manual";
  std::optional<int> version;             // default: latest
  std::optional<std::string> start_node;  // default: plain start events
  std::optional<std::string> timer_job;   // set by fire_timer
  std::optional<Timestamp> rescheduled_due;
};

/// Token-based execution. Every decision is turned into journal events through
/// `commit`; the engine itself holds no state beyond what apply() produces,
/// which is what makes replay exact. Not thread-safe: the owner serializes calls.
class Engine {
 public:
  Engine(const RuntimeState& state, CommitFn commit, NowFn now, EngineOptions options = {});

  /// Records a parsed, validated definition as the next version of its id,
  /// cancels timers of older versions and arms the new version's timers.
  int deploy(const model::ProcessDefinition& def, std::string_view xml, const std::string& user);

  /// Starts an instance and advances it to quiescence. Returns the instance id.
  std::string start_instance(const std::string& definition_id, const VariableMap& vars, const std::string& user,
                             const StartOptions& options = {});

  /// Fires a due timer job: starts an instance of the job's definition version
  /// and re-arms the job for its next period in the same journal event.
  std::string fire_timer(const std::string& job_id);

  void claim_task(const std::string& task_id, const Actor& actor);

  /// Validates the submitted form, merges values, advances the token.
  /// Errors: kNotFound, kForbidden (role), kConflict (not pending), kValidation.
  void complete_task(const std::string& task_id, const VariableMap& values, const Actor& actor);

  /// Delivers a connector result for a service-call job and advances.
  void complete_job(const std::string& job_id, const VariableMap& outputs);

  /// Records a failed attempt; reschedules with exponential backoff or, after
  /// the last attempt, fails the instance naming the connector.
  void fail_job(const std::string& job_id, const std::string& error);

  /// Fails the instance of a job whose attempts are exhausted (recovery path).
  void fail_exhausted(const std::string& job_id);

  void terminate(const std::string& instance_id, const std::string& reason, const std::string& user);

  /// Advances every token that can move without outside input.
  void run(const std::string& instance_id);

  /// After replay: finish interrupted steps of every running instance.
  void recover();

  /// Task authorization rule shared with the API layer.
  static bool may_work_on(const UserTask& task, const Actor& actor);

 private:
  const Instance& instance(const std::string& id) const;
  bool step(const Instance& inst);
  bool join_ready(const Instance& inst, const Token& token, const model::ProcessGraph& g) const;
  void fail_instance(const Instance& inst, const std::string& reason, const std::string& node);

  const RuntimeState& state_;
  CommitFn commit_;
  NowFn now_;
  EngineOptions options_;
};

}  // namespace agriflow::engine
