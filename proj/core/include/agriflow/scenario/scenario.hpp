#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agriflow/model/process_definition.hpp"
#include "agriflow/time.hpp"

namespace agriflow::scenario {

struct DayOverrides {
  std::optional<double> t_max;
  std::optional<double> precipitation_total;
  std::optional<bool> hail_expected;
  std::optional<bool> disease_warning;
  std::optional<bool> qc_needed;
};

/// Decisions of the scripted role agents.
struct AgentPolicy {
  bool qc_needed = false;         // answer to "smart QC analysis needed today"
  bool drone_on_disease = true;   // request drone sensing whenever a disease warning is active
  bool drone_always = false;      // request it on every event day
};

/// One simulation run. Day d (1-based) is the daily instance started d days
/// after `start`, when the definitions are deployed.
///
/// Text form, one setting per line, '#' starts a comment:
///
///   seed 42
///   start 2025-04-30T06:00:00Z
///   days 31
///   location orphanos-vineyard
///   agent qc_needed=false drone_on_disease=true drone_always=false
///   override 7 t_max=36.2
///   override 9 disease_warning=true qc_needed=true
///
/// Override keys: t_max, precipitation_total (decimals), hail_expected,
/// disease_warning, qc_needed (true/false).
struct ScenarioConfig {
  std::uint64_t seed = 42;
  Timestamp start = *parse_timestamp("2025-04-30T06:00:00Z");
  int days = 31;
  std::string location = "orphanos-vineyard";
  AgentPolicy agents;
  std::map<int, DayOverrides> overrides;

  std::string date_of_day(int day) const;
  /// "day:key=value", as given on the command line.
  void add_override(std::string_view spec);
};

ScenarioConfig parse_scenario_config(std::string_view text);
std::string to_text(const ScenarioConfig& config);

struct RoleTally {
  int created = 0;
  int completed = 0;
};

struct DayReport {
  int day = 0;
  std::string date;
  std::string instance_id;  // empty when no instance started that day
  std::string status;
  std::string failure;
  // Gateway inputs as the instance saw them, in display form.
  std::map<std::string, std::string> conditions;
  /// Alert branches in gateway order (heat, rain, hail, disease), then
  /// "event" when the review path ran.
  std::vector<std::string> branches;
  std::vector<std::string> subprocesses;  // qc, drone, action
  std::map<std::string, RoleTally> tasks;  // by candidate role
  int tasks_created = 0;
  int tasks_completed = 0;
  int tasks_pending = 0;
  int tasks_cancelled = 0;
  std::map<std::string, int> connector_calls;
  int connector_failures = 0;
  std::vector<std::string> notifications;  // alert events
  std::vector<std::string> drone_steps;    // completed drone sub-process tasks, in order
  bool drone_report_seen = false;          // the read-report task showed the report reference
  std::vector<std::string> problems;       // agent calls the API refused
};

struct InstanceLine {
  std::string id;
  std::string definition;
  std::string status;
};

struct SimulationReport {
  ScenarioConfig config;
  std::vector<DayReport> days;
  std::vector<InstanceLine> annual;
  std::int64_t journal_events = 0;
  bool replay_identical = false;

  bool all_completed() const;
  std::string text() const;
  nlohmann::json to_json() const;
};

struct RunOptions {
  /// Journal file for the run; in memory when empty.
  std::string journal_path;
  bool fsync = false;
};

/// Deploys the daily and annual definitions, then advances the simulated
/// clock day by day, letting the role agents work every task through the
/// API until the platform is quiescent.
SimulationReport run_simulation(const ScenarioConfig& config, const RunOptions& options = {});

/// The bundled definitions.
std::string daily_definition_xml();
std::string annual_definition_xml();
model::ProcessDefinition build_scenario_definition();
model::ProcessDefinition build_annual_definition();

}  // namespace agriflow::scenario
