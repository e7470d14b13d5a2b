#include <algorithm>
#include <sstream>

#include "agriflow/api/router.hpp"
#include "agriflow/conn/simulators.hpp"
#include "agriflow/error.hpp"
#include "agriflow/platform.hpp"
#include "agriflow/scenario/scenario.hpp"
#include "agriflow/value.hpp"

namespace agriflow::scenario {

using nlohmann::json;

namespace {

constexpr int kMaxRounds = 200;

struct ApiFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One scripted user talking to the platform through the API router.
class Client {
 public:
  Client(const api::Router& router, std::string token) : router_(router), token_(std::move(token)) {}

  json call(const std::string& method, const std::string& target, const json& body = nullptr,
            std::map<std::string, api::FormPart> parts = {}) const {
    api::Request r;
    r.method = method;
    r.target = std::string(api::kApiPrefix) + target;
    r.headers["Authorization"] = "Bearer " + token_;
    if (!body.is_null()) r.body = body.is_string() ? body.get<std::string>() : body.dump();
    r.parts = std::move(parts);
    const api::Response res = router_.handle(r);
    if (res.status >= 300) {
      std::string msg = method + " " + target + " -> " + std::to_string(res.status);
      try {
        const json e = json::parse(res.body);
        msg += " " + e.value("code", "") + ": " + e.value("message", "");
        for (const auto& d : e.value("details", json::array())) msg += "; " + d.get<std::string>();
      } catch (const json::exception&) {
      }
      throw ApiFailure(msg);
    }
    return res.content_type == "application/json" ? json::parse(res.body) : json(res.body);
  }

 private:
  const api::Router& router_;
  std::string token_;
};

api::ServiceConfig agent_config() {
  api::ServiceConfig c;
  const std::vector<std::pair<std::string, Role>> agents{{"manager", Role::kFarmManager},
                                                         {"viticulturist", Role::kAgronomist},
                                                         {"field-worker", Role::kFieldWorker},
                                                         {"drone-operator", Role::kDroneOperator},
                                                         {"qc-device", Role::kQcDeviceUser}};
  for (const auto& [id, role] : agents) c.users.push_back({id, id, {role}, {}, "scenario-" + id + "-token"});
  return c;
}

bool truthy(const json& j) { return j.is_boolean() && j.get<bool>(); }

std::string shown(const json& j) {
  if (j.is_null()) return "-";
  return display(value_from_json(j));
}

std::string decimal(double v) { return format_decimal(std::round(v * 10) / 10); }

class Harness {
 public:
  Harness(const ScenarioConfig& config, const RunOptions& run)
      : config_(config), service_(agent_config()), platform_(options(config, run)), router_(platform_, service_) {
    for (const auto& u : service_.users) clients_.emplace(u.id, Client(router_, u.token));
  }

  SimulationReport run() {
    const Client& manager = clients_.at("manager");
    manager.call("POST", "/definitions", json(daily_definition_xml()));
    manager.call("POST", "/definitions", json(annual_definition_xml()));
    for (int day = 1; day <= config_.days; ++day) {
      const Timestamp at = config_.start + std::chrono::days(day);
      platform_.advance_to(at);
      settle(at + std::chrono::days(1) - std::chrono::seconds(1));
    }
    return report();
  }

 private:
  static PlatformOptions options(const ScenarioConfig& c, const RunOptions& run) {
    PlatformOptions o;
    o.simulated_start = c.start;
    o.fsync = run.fsync;
    if (!run.journal_path.empty()) o.journal_path = run.journal_path;
    o.simulation.seed = c.seed;
    o.simulation.location = c.location;
    for (const auto& [day, ov] : c.overrides) {
      conn::DayOverride& d = o.simulation.overrides[c.date_of_day(day)];
      d.t_max = ov.t_max;
      d.precipitation_total = ov.precipitation_total;
      d.hail_expected = ov.hail_expected;
      d.disease_warning = ov.disease_warning;
    }
    return o;
  }

  // Runs jobs and lets every agent work until nothing moves before `until`.
  void settle(Timestamp until) {
    for (int round = 0; round < kMaxRounds; ++round) {
      bool progressed = !platform_.run_due_jobs().empty();
      for (const char* who : {"viticulturist", "field-worker", "drone-operator", "qc-device"}) {
        const json tasks = clients_.at(who).call("GET", "/tasks");
        for (const json& t : tasks) progressed |= work(who, t);
      }
      if (progressed) continue;
      // Retries waiting on backoff: step the clock to them if they fall today.
      std::optional<Timestamp> next = platform_.read([&](const engine::RuntimeState& s) {
        std::optional<Timestamp> n;
        for (const auto& [id, j] : s.jobs) {
          if (!j.exhausted && j.kind == engine::JobKind::kServiceCall && (!n || j.due_at < *n)) n = j.due_at;
        }
        return n;
      });
      if (!next || *next > until) return;
      platform_.advance_to(*next);
    }
  }

  int day_of(const std::string& start_date) const {
    const auto d = parse_timestamp(start_date + "T00:00:00Z");
    const auto base = std::chrono::floor<std::chrono::days>(config_.start);
    return d ? static_cast<int>((std::chrono::floor<std::chrono::days>(*d) - base).count()) : 0;
  }

  const json& instance_vars(const std::string& id) {
    auto it = vars_.find(id);
    if (it == vars_.end()) {
      it = vars_.emplace(id, clients_.at("manager").call("GET", "/instances/" + id)["variables"]).first;
    }
    return it->second;
  }

  DayOverrides overrides_for(const std::string& instance) {
    const json& v = instance_vars(instance);
    if (!v.contains("start_date")) return {};
    auto it = config_.overrides.find(day_of(v["start_date"].get<std::string>()));
    return it == config_.overrides.end() ? DayOverrides{} : it->second;
  }

  std::string upload(const Client& c, const std::string& kind, const std::string& content, const std::string& instance) {
    return c.call("POST", "/files", nullptr,
                  {{"kind", {kind, "", ""}},
                   {"file", {content, kind + ".txt", "text/plain"}},
                   {"instance", {instance, "", ""}}})["document"];
  }

  std::string qc_report(const std::string& date) const {
    conn::SeededRng rng(config_.seed, "qc.analysis", date);
    std::ostringstream out;
    out << "AGRIREPORT 1\nkind: qc.analysis\nfields: sugar_content:decimal, acidity:decimal\n"
        << "sugar_content = " << decimal(19 + 4 * rng.uniform()) << "\n"
        << "acidity = " << decimal(5 + 2 * rng.uniform()) << "\n";
    return out.str();
  }

  std::string drone_report(const std::string& date) const {
    conn::SeededRng rng(config_.seed, "drone.report", date);
    std::ostringstream out;
    out << "AGRIREPORT 1\nkind: drone.report\nfields: flight_id:text, area_ha:decimal, stressed_area_pct:decimal, summary:text\n"
        << "flight_id = FL-" << date << "\n"
        << "area_ha = 4.2\n"
        << "stressed_area_pct = " << decimal(3 + 20 * rng.uniform()) << "\n"
        << "summary = multispectral survey of both blocks\n";
    return out.str();
  }

  // The events of an instance, in gateway order.
  static std::vector<std::string> triggered(const json& v) {
    std::vector<std::string> out;
    if (v.value("t_max", 0.0) > 35) out.push_back("heat");
    if (v.value("precipitation_total", 0.0) > 6) out.push_back("rain");
    if (truthy(v.value("hail_expected", json(false)))) out.push_back("hail");
    if (truthy(v.value("disease_warning", json(false)))) out.push_back("disease");
    return out;
  }

  bool work(const std::string& who, const json& task) {
    const Client& c = clients_.at(who);
    const std::string id = task["id"], node = task["node"], instance = task["instance_id"];
    const json& display = task["display"];
    const std::string date = instance_vars(instance).value("start_date", "");
    json values;
    try {
      if (node == "ut_define_qc") {
        values = {{"qc_needed", overrides_for(instance).qc_needed.value_or(config_.agents.qc_needed)}};
      } else if (node == "ut_assessment") {
        values = {{"assessment_notes", "walked rows 1-40 on " + date}, {"plant_condition", "good"}};
      } else if (node == "ut_qc_measure") {
        values = {{"sample_id", "QC-" + date}};
      } else if (node == "ut_qc_submit") {
        values = {{"qc_report", upload(c, "qc.analysis", qc_report(date), instance)}};
      } else if (node == "ut_review") {
        const bool drone = config_.agents.drone_always ||
                           (config_.agents.drone_on_disease && truthy(display.value("disease_warning", json(false))));
        values = {{"drone_sensing", drone},
                  {"review_notes", "5-day mean " + shown(display.value("history_temperature_mean", json())) +
                                       " C, rain " + shown(display.value("history_precipitation_total", json())) +
                                       " mm; last irrigation " + shown(display.value("last_irrigation", json()))}};
      } else if (node == "ut_drone_config") {
        values = {{"drone_configuration", "multispectral quadcopter"}};
      } else if (node == "ut_drone_mission") {
        values = {{"mission_plan", "grid survey over P1 and P2 at 40 m"}};
      } else if (node == "ut_drone_debrief") {
        values = {{"debriefing_notes", "flight nominal"}};
      } else if (node == "ut_drone_assess") {
        values = {{"sensing_assessment", "stress patches mapped"}};
      } else if (node == "ut_drone_report") {
        values = {{"drone_report", upload(c, "drone.report", drone_report(date), instance)}};
      } else if (node == "ut_read_drone") {
        const json& r = display.value("drone_report", json());
        report_seen_[instance] = r.is_object() && r.contains("doc");
        values = {{"drone_findings", r.is_object() ? "report " + r["doc"].get<std::string>().substr(0, 19) : "no report"}};
      } else if (node == "ut_define_action") {
        vars_.erase(instance);
        const auto events = triggered(instance_vars(instance));
        std::string action = "inspection";
        if (!events.empty()) {
          const std::string& first = events.front();
          action = first == "heat" ? "irrigation" : first == "disease" ? "spraying" : "drainage";
        }
        std::string why;
        for (const auto& e : events) why += (why.empty() ? "" : ", ") + e;
        values = {{"requested_action", action}, {"instructions", "respond to " + (why.empty() ? "review" : why)}};
      } else if (node == "ut_execute_action") {
        values = {{"action", display.value("requested_action", json("inspection"))}, {"action_done", true}};
      } else if (node == "ut_plan_pruning") {
        values = {{"pruning_plan", "spur pruning, two buds per spur"}};
      } else if (node == "ut_pruning") {
        values = {{"rows_pruned", 40}};
      } else {
        problems_[instance].push_back(who + " has no script for task " + node);
        return false;
      }
      c.call("POST", "/tasks/" + id + "/complete", json{{"values", values}});
      return true;
    } catch (const ApiFailure& e) {
      problems_[instance].push_back(e.what());
      return false;
    }
  }

  SimulationReport report() {
    const Client& manager = clients_.at("manager");
    SimulationReport r;
    r.config = config_;
    std::map<int, DayReport> by_day;
    for (int day = 1; day <= config_.days; ++day) {
      DayReport d;
      d.day = day;
      d.date = config_.date_of_day(day);
      d.status = "Missing";
      by_day[day] = d;
    }
    std::map<std::string, std::vector<std::string>> alerts;
    const json all_notifications = manager.call("GET", "/notifications");
    for (const json& n : all_notifications["items"]) {
      if (n["instance_id"].is_string()) alerts[n["instance_id"].get<std::string>()].push_back(n["event"].get<std::string>());
    }

    for (const json& p : manager.call("GET", "/monitor/processes?scope=all")) {
      const std::string id = p["instance_id"];
      if (p["definition_id"] != "vineyard_daily") {
        r.annual.push_back({id, p["definition_id"], p["status"]});
        continue;
      }
      vars_.erase(id);
      const json& v = instance_vars(id);
      const int day = day_of(v.value("start_date", ""));
      auto slot = by_day.find(day);
      if (slot == by_day.end()) continue;
      DayReport& d = slot->second;
      d.instance_id = id;
      d.status = p["status"];
      d.failure = p["failure"];
      for (const char* k : {"t_max", "precipitation_total", "hail_expected", "disease_warning", "qc_needed"}) {
        d.conditions[k] = shown(v.value(k, json()));
      }
      std::set<std::string> nodes;
      for (const json& a : p["activities"]) nodes.insert(a["node"].get<std::string>());
      for (const auto& [node, name] : std::vector<std::pair<std::string, std::string>>{{"st_alert_heat", "heat"},
                                                                                        {"st_alert_rain", "rain"},
                                                                                        {"st_alert_hail", "hail"},
                                                                                        {"st_alert_disease", "disease"},
                                                                                        {"st_history", "event"}}) {
        if (nodes.count(node)) d.branches.push_back(name);
      }
      for (const auto& [node, name] : std::vector<std::pair<std::string, std::string>>{
               {"sp_qc", "qc"}, {"sp_drone", "drone"}, {"sp_action", "action"}}) {
        if (nodes.count(node)) d.subprocesses.push_back(name);
      }
      for (const json& t : p["tasks"]) {
        const std::string role = t["candidate_role"].is_string() ? t["candidate_role"].get<std::string>() : "assignee";
        const std::string state = t["state"];
        RoleTally& tally = d.tasks[role];
        ++tally.created;
        ++d.tasks_created;
        if (state == "Completed") {
          ++tally.completed;
          ++d.tasks_completed;
          const std::string node = t["node"];
          if (node.rfind("ut_drone_", 0) == 0) d.drone_steps.push_back(node.substr(9));
        } else if (state == "Cancelled") {
          ++d.tasks_cancelled;
        } else {
          ++d.tasks_pending;
        }
      }
      for (const json& e : manager.call("GET", "/history?kind=job_completed&instance=" + id)) {
        ++d.connector_calls[e["payload"]["connector"].get<std::string>()];
      }
      d.connector_failures = static_cast<int>(manager.call("GET", "/history?kind=job_failed&instance=" + id).size());
      d.notifications = alerts[id];
      d.drone_report_seen = report_seen_[id];
      d.problems = problems_[id];
    }
    for (auto& [day, d] : by_day) r.days.push_back(std::move(d));
    r.journal_events = platform_.journal_length();
    r.replay_identical = platform_.replay_matches();
    return r;
  }

  const ScenarioConfig& config_;
  api::ServiceConfig service_;
  Platform platform_;
  api::Router router_;
  std::map<std::string, Client> clients_;
  std::map<std::string, json> vars_;
  std::map<std::string, bool> report_seen_;
  std::map<std::string, std::vector<std::string>> problems_;
};

}  // namespace

SimulationReport run_simulation(const ScenarioConfig& config, const RunOptions& options) {
  return Harness(config, options).run();
}

}  // namespace agriflow::scenario
