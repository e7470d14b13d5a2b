#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agriflow/model/process_definition.hpp"
#include "agriflow/roles.hpp"
#include "agriflow/store/event_record.hpp"
#include "agriflow/time.hpp"
#include "agriflow/value.hpp"

namespace agriflow::engine {

enum class InstanceStatus { kRunning, kCompleted, kTerminated, kFailed };
enum class TaskState { kCreated, kAssigned, kCompleted, kCancelled };
enum class JobKind { kServiceCall, kTimerFire };

const char* to_string(InstanceStatus s) noexcept;
const char* to_string(TaskState s) noexcept;
const char* to_string(JobKind k) noexcept;

inline constexpr const char* kRootScope = "root";

struct Token {
  std::int64_t id = 0;
  std::string node;
  std::string via;    // incoming flow id, empty for start tokens
  std::string scope;  // kRootScope or a sub-process activation key
  /// Empty while the token still has to be processed at its node; otherwise
  /// the task or job id it is parked on.
  std::string wait;
};

/// An entered sub-process. Child tokens carry `key` as their scope.
struct ScopeFrame {
  std::string key;     // "<subprocess id>#<entering token id>"
  std::string node;    // sub-process node id
  std::string parent;  // enclosing scope key
};

/// One activation of an activity node, used for progress reporting.
struct Activity {
  std::string key;  // task id, job id or scope key
  std::string node;
  std::string name;
  model::NodeKind kind = model::NodeKind::kUserTask;
  std::string state;  // "active", "completed", "cancelled"
};

struct Instance {
  std::string id;
  std::string definition_id;
  int version = 0;
  InstanceStatus status = InstanceStatus::kRunning;
  std::string trigger;  // "manual" or "timer"
  std::string started_by;
  Timestamp created_at{};
  std::optional<Timestamp> ended_at;
  std::map<std::int64_t, Token> tokens;
  std::int64_t next_token = 1;
  std::map<std::string, ScopeFrame> scopes;
  VariableMap variables;
  std::vector<Activity> activities;
  std::string failure;
};

struct UserTask {
  std::string id;
  std::string instance_id;
  std::string node;
  std::string name;
  std::int64_t token = 0;
  std::optional<Role> candidate_role;
  std::vector<model::FormField> form_fields;
  std::vector<std::string> display_variables;
  TaskState state = TaskState::kCreated;
  std::optional<std::string> assignee;
  Timestamp created_at{};
  std::optional<Timestamp> completed_at;
  std::optional<std::string> completed_by;
  VariableMap submitted_values;

  bool pending() const noexcept { return state == TaskState::kCreated || state == TaskState::kAssigned; }
};

struct Job {
  std::string id;
  JobKind kind = JobKind::kServiceCall;
  Timestamp due_at{};
  int attempts = 0;
  int max_attempts = 3;
  bool exhausted = false;
  std::string last_error;
  // service calls
  std::optional<std::string> instance_id;
  std::string node;
  std::int64_t token = 0;
  std::string connector;
  VariableMap inputs;
  // timers
  std::string definition_id;
  int version = 0;
  std::string timer;  // verbatim timer expression
  std::optional<std::int64_t> remaining;  // bounded cycles: firings left including this one
};

struct Contact {
  std::string name;
  std::string address;
  friend bool operator==(const Contact&, const Contact&) = default;
};

struct Notification {
  std::string id;
  std::string recipient_role;
  std::string severity;  // info, warning, alert
  std::string body;
  std::string source;  // engine, connector
  std::string event;
  std::optional<std::string> instance_id;
  std::optional<std::string> source_job;  // job whose connector raised it
  Timestamp created_at{};
  std::vector<Contact> forwarded_to;
  bool read = false;
};

struct Document {
  std::string id;  // "sha256:<hex>"
  std::string kind;
  std::string content;
  nlohmann::json metadata = nlohmann::json::object();
  VariableMap variables;
  std::string uploaded_by;
  std::optional<std::string> instance_id;
  Timestamp ingested_at{};
};

struct ViewEntry {
  std::string source;
  nlohmann::json params = nlohmann::json::object();
};

struct View {
  std::string id;
  std::string title;
  std::vector<ViewEntry> entries;
};

struct DeployedDefinition {
  std::string id;
  int version = 0;
  std::string name;
  std::string xml;
  std::string deployed_by;
  Timestamp deployed_at{};
  std::shared_ptr<const model::ProcessDefinition> def;
};

/// Everything the platform knows, reconstructed purely from the journal.
/// Mutated only by apply().
struct RuntimeState {
  std::map<std::string, std::vector<DeployedDefinition>> definitions;  // versions ascending
  std::map<std::string, Instance> instances;
  std::map<std::string, UserTask> tasks;
  std::map<std::string, Job> jobs;
  std::map<std::string, Notification> notifications;
  std::map<std::string, Document> documents;
  std::map<std::string, std::vector<Contact>> contacts;      // by user id
  std::map<std::string, std::map<std::string, View>> views;  // by user id, then view id
  std::int64_t instance_counter = 0;
  std::int64_t task_counter = 0;
  std::int64_t job_counter = 0;
  std::int64_t notification_counter = 0;
  std::int64_t last_sequence = 0;
  Timestamp last_event_at{};

  const DeployedDefinition* latest(const std::string& definition_id) const;
  const DeployedDefinition* find_definition(const std::string& definition_id, int version) const;
  const model::ProcessDefinition& definition_of(const Instance& inst) const;
  /// Graph that holds nodes of `scope` for an instance.
  const model::ProcessGraph& scope_graph(const Instance& inst, const std::string& scope) const;
};

std::string format_id(const char* prefix, std::int64_t n);

/// Applies one journal record. Throws Error(kStorage) when the record does not
/// fit the state (unknown ids, gaps), which replay reports as corruption.
void apply(RuntimeState& state, const store::EventRecord& record);

/// Canonical, key-sorted serialization used for replay equality and snapshots.
nlohmann::json canonical(const RuntimeState& state);
std::string canonical_text(const RuntimeState& state);

/// Inverse of canonical(), used to restore snapshots.
RuntimeState state_from_canonical(const nlohmann::json& j);

}  // namespace agriflow::engine
