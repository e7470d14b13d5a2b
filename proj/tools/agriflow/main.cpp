#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "agriflow/api/http_server.hpp"
#include "agriflow/error.hpp"
#include "agriflow/scenario/scenario.hpp"
#include "agriflow/value.hpp"

using namespace agriflow;
using nlohmann::json;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Where requests go: an in-process platform over a journal file, or a server.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual api::Response send(const api::Request& r) = 0;
  virtual void after_write() {}
};

class LocalTransport : public Transport {
 public:
  LocalTransport(const api::ServiceConfig& config, const std::filesystem::path& base)
      : platform_(config.platform_options(base)), router_(platform_, config) {}
  api::Response send(const api::Request& r) override { return router_.handle(r); }
  // Nothing else runs the scheduler in embedded mode.
  void after_write() override { platform_.run_due_jobs(); }
  Platform& platform() { return platform_; }

 private:
  Platform platform_;
  api::Router router_;
};

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(const std::string& url) : client_(url) { client_.set_read_timeout(60, 0); }
  api::Response send(const api::Request& r) override {
    httplib::Headers headers(r.headers.begin(), r.headers.end());
    httplib::Result res;
    if (!r.parts.empty()) {
      httplib::MultipartFormDataItems items;
      for (const auto& [name, p] : r.parts) items.push_back({name, p.content, p.filename, p.content_type});
      res = client_.Post(r.target, headers, items);
    } else if (r.method == "GET") {
      res = client_.Get(r.target, headers);
    } else if (r.method == "DELETE") {
      res = client_.Delete(r.target, headers);
    } else if (r.method == "PUT") {
      res = client_.Put(r.target, headers, r.body, "application/json");
    } else {
      res = client_.Post(r.target, headers, r.body, "application/json");
    }
    if (!res) throw Failure("cannot reach server: " + httplib::to_string(res.error()));
    return {res->status, res->get_header_value("Content-Type"), res->body};
  }

 private:
  httplib::Client client_;
};

struct Session {
  api::ServiceConfig config;
  std::filesystem::path base;
  std::unique_ptr<Transport> transport;
  std::string token;

  api::Response raw(const std::string& method, const std::string& target, std::string body = {},
                    std::map<std::string, api::FormPart> parts = {}) {
    api::Request r;
    r.method = method;
    r.target = std::string(api::kApiPrefix) + target;
    r.headers["Authorization"] = "Bearer " + token;
    r.body = std::move(body);
    r.parts = std::move(parts);
    api::Response res = transport->send(r);
    if (res.status >= 300) {
      std::string msg = "error " + std::to_string(res.status);
      try {
        const json e = json::parse(res.body);
        msg += " " + e.value("code", "") + ": " + e.value("message", "");
        for (const auto& d : e.value("details", json::array())) msg += "\n  " + d.get<std::string>();
      } catch (const json::exception&) {
        msg += ": " + res.body;
      }
      throw Failure(msg);
    }
    if (method != "GET") transport->after_write();
    return res;
  }

  json call(const std::string& method, const std::string& target, const json& body = nullptr) {
    return json::parse(raw(method, target, body.is_null() ? "" : body.dump()).body);
  }
};

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string url_part(const std::string& s) { return httplib::detail::encode_url(s); }

// "k=v" pairs, typed by the task's form where it has the field.
json form_values(const std::vector<std::string>& pairs, const json& form) {
  json out = json::object();
  for (const auto& kv : pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Failure("field '" + kv + "' is not key=value");
    const std::string key = kv.substr(0, eq), text = kv.substr(eq + 1);
    std::optional<ValueType> type;
    for (const auto& f : form) {
      if (f["name"] == key) type = parse_value_type(f["type"].get<std::string>());
    }
    if (!type) {
      out[key] = text;
      continue;
    }
    if (*type == ValueType::kDocument) {
      out[key] = text;
      continue;
    }
    try {
      out[key] = to_json(parse_value(*type, text));
    } catch (const Error& e) {
      throw Failure("field '" + key + "': " + e.what());
    }
  }
  return out;
}

void print_task(const json& t) {
  std::cout << t["id"].get<std::string>() << "  " << t["name"].get<std::string>() << "  ["
            << t["instance_id"].get<std::string>() << "/" << t["node"].get<std::string>() << "]";
  if (t["assignee"].is_string()) std::cout << " assigned to " << t["assignee"].get<std::string>();
  std::cout << "\n    form:";
  for (const auto& f : t["form"]) {
    std::cout << " " << f["name"].get<std::string>() << ":" << f["type"].get<std::string>()
              << (f["required"].get<bool>() ? "*" : "");
  }
  std::cout << "\n";
  for (const auto& [k, v] : t["display"].items()) std::cout << "    " << k << " = " << v.dump() << "\n";
}

std::atomic<bool> g_stop{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"agriflow: agricultural workflow platform"};
  app.require_subcommand(1);

  std::string config_path = "config/agriflow.json";
  std::string journal, url, user;
  app.add_option("-c,--config", config_path, "Service configuration file")->capture_default_str();
  app.add_option("--journal", journal, "Journal file (overrides the configuration)");
  app.add_option("--url", url, "Talk to a running server instead of the journal directly");
  app.add_option("--as", user, "Act as this user id (default: the first FarmManager)");

  auto* deploy = app.add_subcommand("deploy", "Deploy a BPMN definition");
  std::string xml_path;
  deploy->add_option("xml", xml_path, "BPMN XML file")->required();

  auto* start = app.add_subcommand("start", "Start an instance");
  std::string def_id;
  std::vector<std::string> start_vars;
  start->add_option("definition", def_id)->required();
  start->add_option("--var", start_vars, "Initial variable k=v (text)");

  auto* tasks = app.add_subcommand("tasks", "List the caller's pending tasks");

  auto* complete = app.add_subcommand("complete", "Complete a task");
  std::string task_id;
  std::vector<std::string> fields;
  complete->add_option("task", task_id)->required();
  complete->add_option("--field", fields, "Form value k=v");

  auto* upload = app.add_subcommand("upload", "Upload a report file");
  std::string up_kind, up_file, up_instance;
  upload->add_option("kind", up_kind)->required();
  upload->add_option("file", up_file)->required();
  upload->add_option("--instance", up_instance);

  auto* monitor = app.add_subcommand("monitor", "Show process progress");
  std::string scope;
  monitor->add_option("--scope", scope, "all or mine");

  auto* notifications = app.add_subcommand("notifications", "List notifications");

  auto* render = app.add_subcommand("render-map", "Render an index map for an instance");
  std::string map_instance, map_index, map_out, map_mode = "parcel", legend_out;
  int map_scale = 8;
  render->add_option("instance", map_instance)->required();
  render->add_option("index", map_index, "NDVI, NDMI or OSAVI")->required();
  render->add_option("-o,--output", map_out, "PPM output file")->required();
  render->add_option("--mode", map_mode)->check(CLI::IsMember({"parcel", "cell"}));
  render->add_option("--scale", map_scale)->check(CLI::Range(1, 64));
  render->add_option("--legend", legend_out, "Write the legend JSON here");

  auto* history = app.add_subcommand("history", "Query the journal");
  std::string h_instance, h_kind;
  int h_last = 0;
  history->add_option("--instance", h_instance);
  history->add_option("--kind", h_kind);
  history->add_option("--last", h_last);

  auto* run = app.add_subcommand("run", "Run the jobs that are due now (embedded mode)");

  auto* replay = app.add_subcommand("replay-check", "Replay the journal and compare with the live state");

  auto* simulate = app.add_subcommand("simulate", "Run the vineyard scenario on a simulated clock");
  int days = 31;
  std::uint64_t seed = 42;
  std::vector<std::string> overrides;
  std::string scenario_file, json_out, sim_journal;
  simulate->add_option("--days", days)->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed);
  simulate->add_option("--override", overrides, "day:key=value, e.g. 7:t_max=36.2");
  simulate->add_option("--scenario", scenario_file, "Scenario configuration file");
  simulate->add_option("--json", json_out, "Also write the machine-readable report here");
  simulate->add_option("--sim-journal", sim_journal, "Keep the run's journal in this file");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  std::string host;
  int port = 0;
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      scenario::ScenarioConfig sc;
      if (!scenario_file.empty()) sc = scenario::parse_scenario_config(read_all(scenario_file));
      if (simulate->count("--days")) sc.days = days;
      if (simulate->count("--seed")) sc.seed = seed;
      for (const auto& o : overrides) sc.add_override(o);
      if (!sim_journal.empty()) std::filesystem::remove(sim_journal);
      const auto report = scenario::run_simulation(sc, {sim_journal, false});
      std::cout << report.text();
      if (!json_out.empty()) std::ofstream(json_out) << report.to_json().dump(2) << "\n";
      return report.all_completed() && report.replay_identical ? 0 : 1;
    }

    Session s;
    s.config = api::load_config(config_path);
    s.base = std::filesystem::absolute(config_path).parent_path();
    if (!journal.empty()) s.config.journal = journal;
    if (!url.empty()) {
      s.transport = std::make_unique<HttpTransport>(url);
    } else {
      if (s.config.journal) std::filesystem::create_directories((s.base / *s.config.journal).parent_path());
      s.transport = std::make_unique<LocalTransport>(s.config, s.base);
    }
    const api::User* who = nullptr;
    if (!user.empty()) {
      who = s.config.user_by_id(user);
      if (!who) throw Failure("unknown user '" + user + "'");
    } else {
      for (const auto& u : s.config.users) {
        if (!who && u.roles.count(Role::kFarmManager)) who = &u;
      }
      if (!who) throw Failure("no FarmManager in the configuration; pass --as");
    }
    s.token = who->token;

    if (*deploy) {
      const json r = json::parse(s.raw("POST", "/definitions", read_all(xml_path)).body);
      std::cout << "deployed " << r["id"].get<std::string>() << " version " << r["version"] << "\n";
    } else if (*start) {
      json vars = json::object();
      for (const auto& kv : start_vars) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Failure("variable '" + kv + "' is not key=value");
        vars[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      const json r = s.call("POST", "/instances", {{"definition", def_id}, {"variables", vars}});
      std::cout << r["instance_id"].get<std::string>() << " " << r["status"].get<std::string>() << "\n";
    } else if (*tasks) {
      const json list = s.call("GET", "/tasks");
      if (list.empty()) std::cout << "no pending tasks\n";
      for (const auto& t : list) print_task(t);
    } else if (*complete) {
      const json task = s.call("GET", "/tasks/" + url_part(task_id));
      const json r = s.call("POST", "/tasks/" + url_part(task_id) + "/complete",
                            {{"values", form_values(fields, task["form"])}});
      std::cout << task_id << " completed; " << r["instance"]["id"].get<std::string>() << " "
                << r["instance"]["status"].get<std::string>() << "\n";
    } else if (*upload) {
      std::map<std::string, api::FormPart> parts{{"kind", {up_kind, "", ""}},
                                                 {"file", {read_all(up_file), up_file, "text/plain"}}};
      if (!up_instance.empty()) parts["instance"] = {up_instance, "", ""};
      const json r = json::parse(s.raw("POST", "/files", "", parts).body);
      std::cout << r["document"].get<std::string>() << (r["duplicate"].get<bool>() ? " (already stored)" : "") << "\n";
      for (const auto& [k, v] : r["variables"].items()) std::cout << "  " << k << " = " << v.dump() << "\n";
    } else if (*monitor) {
      const json list = s.call("GET", "/monitor/processes" + (scope.empty() ? "" : "?scope=" + scope));
      if (list.empty()) std::cout << "no instances\n";
      for (const auto& p : list) {
        std::cout << p["instance_id"].get<std::string>() << "  " << p["definition_name"].get<std::string>() << "  "
                  << p["status"].get<std::string>() << "  " << static_cast<int>(p["progress"].get<double>() * 100 + 0.5)
                  << "% (" << p["completed_activities"] << "/" << p["activated_activities"] << ")\n";
        for (const auto& t : p["tasks"]) {
          std::cout << "    " << t["id"].get<std::string>() << " " << t["name"].get<std::string>() << ": "
                    << t["state"].get<std::string>() << "\n";
        }
      }
    } else if (*notifications) {
      const json r = s.call("GET", "/notifications");
      for (const auto& n : r["items"]) {
        std::cout << n["id"].get<std::string>() << " [" << n["severity"].get<std::string>() << "] "
                  << n["body"].get<std::string>() << (n["read"].get<bool>() ? "" : " (unread)") << "\n";
      }
    } else if (*render) {
      const std::string q = "?mode=" + map_mode + "&scale=" + std::to_string(map_scale);
      const std::string base = "/maps/" + url_part(map_instance) + "/" + url_part(map_index);
      std::ofstream(map_out, std::ios::binary) << s.raw("GET", base + q).body;
      const json legend = s.call("GET", base + "/legend" + q);
      if (!legend_out.empty()) std::ofstream(legend_out) << legend.dump(2) << "\n";
      std::cout << "wrote " << map_out << " (" << legend["width"] << "x" << legend["height"] << ")\n";
      for (const auto& p : legend["parcels"]) {
        std::cout << "  " << p["id"].get<std::string>() << " " << p["name"].get<std::string>() << ": mean "
                  << p["mean"].dump() << " class " << p["class"].dump() << "\n";
      }
    } else if (*history) {
      std::string q;
      auto add = [&](const std::string& k, const std::string& v) { q += (q.empty() ? "?" : "&") + k + "=" + url_part(v); };
      if (!h_instance.empty()) add("instance", h_instance);
      if (!h_kind.empty()) add("kind", h_kind);
      if (h_last > 0) add("last", std::to_string(h_last));
      for (const auto& e : s.call("GET", "/history" + q)) std::cout << e.dump() << "\n";
    } else if (*run) {
      auto* local = dynamic_cast<LocalTransport*>(s.transport.get());
      if (!local) throw Failure("run works on the journal directly; a server runs its own jobs");
      for (const auto& o : local->platform().run_due_jobs()) {
        std::cout << o.job_id << " " << o.connector << " attempt " << o.attempt << (o.success ? " ok" : " failed: " + o.error)
                  << "\n";
      }
    } else if (*replay) {
      auto* local = dynamic_cast<LocalTransport*>(s.transport.get());
      if (!local) throw Failure("replay-check reads the journal directly; drop --url");
      std::string diff;
      if (!local->platform().replay_matches(&diff)) {
        std::cerr << "replay differs: " << diff << "\n";
        return 1;
      }
      std::cout << "replay identical (" << local->platform().journal_length() << " events)\n";
    } else if (*serve) {
      auto* local = dynamic_cast<LocalTransport*>(s.transport.get());
      if (!local) throw Failure("serve runs the platform itself; drop --url");
      api::Router router(local->platform(), s.config);
      api::HttpServer server(router);
      const int bound = server.bind(host.empty() ? s.config.listen : host, port ? port : s.config.port);
      local->platform().start_worker(std::chrono::milliseconds(s.config.poll_interval_ms));
      std::cout << "listening on " << (host.empty() ? s.config.listen : host) << ":" << bound << std::endl;
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      std::thread t([&] { server.serve(); });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      t.join();
      local->platform().stop_worker();
    }
    return 0;
  } catch (const Failure& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error " << to_string(e.code()) << ": " << e.what() << "\n";
    for (const auto& d : e.details()) std::cerr << "  " << d << "\n";
    return 1;
  }
}
