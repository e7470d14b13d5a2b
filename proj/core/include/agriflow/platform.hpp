#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "agriflow/conn/connector.hpp"
#include "agriflow/conn/simulators.hpp"
#include "agriflow/engine/engine.hpp"
#include "agriflow/engine/state.hpp"
#include "agriflow/sched/clock.hpp"
#include "agriflow/store/journal.hpp"

namespace agriflow {

struct PlatformOptions {
  /// File-backed journal; in memory when unset.
  std::optional<std::filesystem::path> journal_path;
  bool fsync = true;
  /// Snapshot to start replay from, if present and consistent with the journal.
  std::optional<std::filesystem::path> snapshot_path;
  /// Simulated clock starting here; real clock when unset.
  std::optional<Timestamp> simulated_start;
  engine::EngineOptions engine;
  conn::SimulationConfig simulation;
  bool register_simulators = true;
  /// Restricts the simulators to these kinds; all of them when unset.
  std::optional<std::set<std::string>> connector_kinds;
  /// Finish interrupted work (exhausted jobs, unprocessed tokens) after replay.
  bool recover_on_open = true;
};

struct DeployResult {
  std::string id;
  int version = 0;
  std::string name;
};

struct IngestResult {
  DocumentRef document;
  VariableMap variables;
  bool duplicate = false;
};

/// What happened to one job attempt.
struct JobOutcome {
  std::string job_id;
  engine::JobKind kind = engine::JobKind::kServiceCall;
  std::string connector;
  std::optional<std::string> instance_id;  // started instance for timers
  int attempt = 0;
  bool success = false;
  bool terminal = false;  // no further attempts
  bool discarded = false;  // job vanished while the connector ran
  std::string error;
  VariableMap outputs;
};

/// The running service: journal, replayed state, engine, scheduler and
/// connectors behind one commit point. Writers are serialized by one lock;
/// readers share it and see a consistent journal prefix.
class Platform {
 public:
  explicit Platform(PlatformOptions options = {});
  ~Platform();
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  template <class F>
  decltype(auto) read(F&& f) const {
    std::shared_lock lock(mu_);
    return f(state_);
  }

  DeployResult deploy(std::string_view xml, const std::string& user);
  std::string start(const std::string& definition_id, const VariableMap& vars, const std::string& user);
  void claim(const std::string& task_id, const engine::Actor& actor);
  void complete(const std::string& task_id, const VariableMap& values, const engine::Actor& actor);
  void terminate(const std::string& instance_id, const std::string& reason, const std::string& user);

  /// Stores a report for a file-upload connector kind. Identical bytes return
  /// the existing reference and journal nothing.
  IngestResult ingest_file(const std::string& kind, std::string_view bytes, const nlohmann::json& metadata,
                           const std::string& user, const std::optional<std::string>& instance_id = std::nullopt);

  void mark_read(const std::string& notification_id);
  /// Adds contacts (by address, from the user's list) to a notification.
  /// Already-forwarded contacts are skipped; nothing new journals nothing.
  engine::Notification forward(const std::string& notification_id, const std::vector<std::string>& addresses,
                                      const std::string& user);
  void add_contact(const std::string& user, const engine::Contact& contact);
  void put_view(const std::string& user, const engine::View& view);
  void delete_view(const std::string& user, const std::string& view_id);

  /// Runs every job due at the current time, lowest (due_at, id) first,
  /// until none is due.
  std::vector<JobOutcome> run_due_jobs();
  /// Simulated clock: steps through each due time up to `t`, running jobs.
  std::vector<JobOutcome> advance_to(Timestamp t);

  /// Real-clock background job runner.
  void start_worker(std::chrono::milliseconds poll = std::chrono::milliseconds(500));
  void stop_worker();

  std::vector<store::EventRecord> history(const store::HistoryFilter& filter) const;
  std::int64_t journal_length() const;
  std::string journal_text() const;

  /// Replays the journal into a fresh state and compares canonical text.
  /// On mismatch fills `diff` with the first differing line.
  bool replay_matches(std::string* diff = nullptr) const;
  std::string canonical_state() const;
  void write_snapshot(const std::filesystem::path& path) const;

  /// Break point found when the journal was opened, if its tail was cut.
  const std::optional<store::JournalBreak>& recovered_break() const noexcept { return break_; }
  std::int64_t replayed_from_snapshot() const noexcept { return snapshot_sequence_; }

  sched::Clock& clock() noexcept { return clock_; }
  conn::ConnectorRegistry& connectors() noexcept { return registry_; }
  const conn::ConnectorRegistry& connectors() const noexcept { return registry_; }
  store::Journal& journal_for_testing() noexcept { return journal_; }

 private:
  void commit(store::EventKind kind, std::optional<std::string> instance, nlohmann::json payload);
  void heal();
  template <class F>
  decltype(auto) mutate(F&& f);
  std::optional<JobOutcome> run_one();
  DocumentRef store_document(const std::string& kind, const std::string& content, const nlohmann::json& metadata,
                             const VariableMap& variables, const std::string& user,
                             const std::optional<std::string>& instance_id);

  PlatformOptions options_;
  mutable std::shared_mutex mu_;
  std::mutex jobs_mu_;  // one job runner at a time
  sched::Clock clock_;
  store::Journal journal_;
  engine::RuntimeState state_;
  conn::ConnectorRegistry registry_;
  engine::Engine engine_;
  std::optional<store::JournalBreak> break_;
  std::int64_t snapshot_sequence_ = 0;
  bool dirty_ = false;

  std::thread worker_;
  std::mutex worker_mu_;
  std::condition_variable worker_cv_;
  bool worker_stop_ = false;
};

/// UTF-8 well-formedness (no overlong forms, surrogates or values past U+10FFFF).
bool valid_utf8(std::string_view bytes);

}  // namespace agriflow
