#include <sstream>

#include "agriflow/scenario/scenario.hpp"

namespace agriflow::scenario {

namespace {

std::string joined(const std::vector<std::string>& items, const char* empty = "none") {
  if (items.empty()) return empty;
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : " ") + s;
  return out;
}

std::string two_digits(int n) { return (n < 10 ? "0" : "") + std::to_string(n); }

}  // namespace

bool SimulationReport::all_completed() const {
  for (const auto& d : days) {
    if (d.status != "Completed") return false;
  }
  for (const auto& a : annual) {
    if (a.status != "Completed") return false;
  }
  return true;
}

std::string SimulationReport::text() const {
  std::ostringstream out;
  out << "AGRIFLOW SIMULATION REPORT\n" << to_text(config) << "\n";

  int completed = 0, failed = 0;
  std::map<std::string, int> branch_days, sub_days, calls;
  RoleTally total;
  int pending = 0;
  for (const auto& d : days) {
    out << "day " << two_digits(d.day) << " " << d.date << " " << (d.instance_id.empty() ? "-" : d.instance_id) << " "
        << d.status << "\n";
    if (!d.failure.empty()) out << "  failure " << d.failure << "\n";
    out << "  conditions";
    for (const auto& [k, v] : d.conditions) out << " " << k << "=" << v;
    out << "\n  branches " << joined(d.branches) << "\n";
    out << "  subprocesses " << joined(d.subprocesses) << "\n";
    if (!d.drone_steps.empty()) {
      out << "  drone steps " << joined(d.drone_steps) << "; report " << (d.drone_report_seen ? "seen" : "not seen")
          << "\n";
    }
    out << "  tasks";
    for (const auto& [role, t] : d.tasks) out << " " << role << "=" << t.completed << "/" << t.created;
    out << " pending=" << d.tasks_pending;
    if (d.tasks_cancelled) out << " cancelled=" << d.tasks_cancelled;
    out << "\n  connectors";
    for (const auto& [k, n] : d.connector_calls) out << " " << k << "=" << n;
    if (d.connector_failures) out << " failed_attempts=" << d.connector_failures;
    out << "\n  notifications " << joined(d.notifications) << "\n";
    for (const auto& p : d.problems) out << "  problem " << p << "\n";

    completed += d.status == "Completed";
    failed += d.status == "Failed";
    for (const auto& b : d.branches) ++branch_days[b];
    for (const auto& s : d.subprocesses) ++sub_days[s];
    for (const auto& [k, n] : d.connector_calls) calls[k] += n;
    total.created += d.tasks_created;
    total.completed += d.tasks_completed;
    pending += d.tasks_pending;
  }
  out << "\nsummary\n";
  out << "  daily instances " << days.size() << " completed " << completed << " failed " << failed << "\n";
  out << "  annual instances " << annual.size();
  for (const auto& a : annual) out << " " << a.id << "=" << a.status;
  out << "\n  branch days";
  for (const char* b : {"heat", "rain", "hail", "disease", "event"}) out << " " << b << "=" << branch_days[b];
  out << "\n  subprocess days";
  for (const char* s : {"qc", "drone", "action"}) out << " " << s << "=" << sub_days[s];
  out << "\n  tasks created " << total.created << " completed " << total.completed << " pending " << pending << "\n";
  out << "  connector calls";
  for (const auto& [k, n] : calls) out << " " << k << "=" << n;
  out << "\n  journal events " << journal_events << "\n";
  out << "  replay " << (replay_identical ? "identical" : "DIFFERENT") << "\n";
  return out.str();
}

nlohmann::json SimulationReport::to_json() const {
  using nlohmann::json;
  json out_days = json::array();
  for (const auto& d : days) {
    json tasks = json::object();
    for (const auto& [role, t] : d.tasks) tasks[role] = {{"created", t.created}, {"completed", t.completed}};
    out_days.push_back({{"day", d.day},
                        {"date", d.date},
                        {"instance_id", d.instance_id},
                        {"status", d.status},
                        {"failure", d.failure},
                        {"conditions", d.conditions},
                        {"branches", d.branches},
                        {"subprocesses", d.subprocesses},
                        {"tasks_by_role", tasks},
                        {"tasks_created", d.tasks_created},
                        {"tasks_completed", d.tasks_completed},
                        {"tasks_pending", d.tasks_pending},
                        {"tasks_cancelled", d.tasks_cancelled},
                        {"connector_calls", d.connector_calls},
                        {"connector_failures", d.connector_failures},
                        {"notifications", d.notifications},
                        {"drone_steps", d.drone_steps},
                        {"drone_report_seen", d.drone_report_seen},
                        {"problems", d.problems}});
  }
  json annual_j = json::array();
  for (const auto& a : annual) annual_j.push_back({{"id", a.id}, {"definition", a.definition}, {"status", a.status}});
  return {{"config", to_text(config)},
          {"days", out_days},
          {"annual", annual_j},
          {"journal_events", journal_events},
          {"replay_identical", replay_identical},
          {"all_completed", all_completed()}};
}

}  // namespace agriflow::scenario
