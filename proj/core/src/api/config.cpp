#include "agriflow/api/config.hpp"

#include <fstream>

#include "agriflow/error.hpp"

namespace agriflow::api {

using nlohmann::json;

const User* ServiceConfig::user_by_token(std::string_view token) const {
  if (token.empty()) return nullptr;
  for (const auto& u : users) {
    if (u.token == token) return &u;
  }
  return nullptr;
}

const User* ServiceConfig::user_by_id(std::string_view id) const {
  for (const auto& u : users) {
    if (u.id == id) return &u;
  }
  return nullptr;
}

const CatalogSource* ServiceConfig::source(std::string_view id) const {
  for (const auto& s : catalog) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

PlatformOptions ServiceConfig::platform_options(const std::filesystem::path& base) const {
  PlatformOptions o;
  auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() || base.empty() ? p : base / p; };
  if (journal) o.journal_path = resolve(*journal);
  if (snapshot) o.snapshot_path = resolve(*snapshot);
  o.fsync = fsync;
  o.engine = engine;
  o.simulation = simulation;
  o.connector_kinds = connectors;
  return o;
}

ServiceConfig parse_config(const json& j) {
  ServiceConfig c;
  std::vector<std::string> problems;
  try {
    if (j.contains("service")) {
      const json& s = j["service"];
      c.listen = s.value("listen", c.listen);
      c.port = s.value("port", c.port);
      if (s.contains("journal")) c.journal = s["journal"].get<std::string>();
      if (s.contains("snapshot")) c.snapshot = s["snapshot"].get<std::string>();
      c.fsync = s.value("fsync", c.fsync);
    }
    if (j.contains("scheduler")) {
      const json& s = j["scheduler"];
      c.poll_interval_ms = s.value("poll_interval_ms", c.poll_interval_ms);
      c.engine.max_attempts = s.value("max_attempts", c.engine.max_attempts);
      c.engine.backoff_initial_seconds = s.value("backoff_initial_seconds", c.engine.backoff_initial_seconds);
      if (c.engine.max_attempts < 1) problems.push_back("scheduler.max_attempts must be at least 1");
      if (c.engine.backoff_initial_seconds < 1) problems.push_back("scheduler.backoff_initial_seconds must be positive");
      if (c.poll_interval_ms < 1) problems.push_back("scheduler.poll_interval_ms must be positive");
    }
    if (j.contains("simulation")) {
      const json& s = j["simulation"];
      c.simulation.seed = s.value("seed", c.simulation.seed);
      c.simulation.location = s.value("location", c.simulation.location);
    }
    if (j.contains("connectors")) {
      std::set<std::string> kinds;
      for (const json& k : j["connectors"]) kinds.insert(k.at("kind").get<std::string>());
      c.connectors = std::move(kinds);
    }
    std::set<std::string> ids, tokens;
    for (const json& u : j.value("users", json::array())) {
      User user;
      user.id = u.at("id").get<std::string>();
      user.name = u.value("name", user.id);
      user.token = u.at("token").get<std::string>();
      for (const json& r : u.at("roles")) {
        const auto name = r.get<std::string>();
        if (auto role = parse_role(name)) {
          user.roles.insert(*role);
        } else {
          problems.push_back("user '" + user.id + "' has unknown role '" + name + "'");
        }
      }
      for (const json& g : u.value("groups", json::array())) user.groups.insert(g.get<std::string>());
      if (user.roles.empty()) problems.push_back("user '" + user.id + "' needs at least one role");
      if (user.token.size() < 8) problems.push_back("user '" + user.id + "' token is shorter than 8 characters");
      if (!ids.insert(user.id).second) problems.push_back("user id '" + user.id + "' appears twice");
      if (!tokens.insert(user.token).second) problems.push_back("user '" + user.id + "' reuses another user's token");
      c.users.push_back(std::move(user));
    }
    std::set<std::string> sources;
    for (const json& s : j.value("catalog", json::array())) {
      CatalogSource src;
      src.id = s.at("id").get<std::string>();
      src.title = s.value("title", src.id);
      if (s.contains("embed_url")) src.embed_url = s["embed_url"].get<std::string>();
      if (s.contains("connector")) src.connector = s["connector"].get<std::string>();
      if (!src.embed_url && !src.connector) problems.push_back("catalog source '" + src.id + "' needs embed_url or connector");
      if (!sources.insert(src.id).second) problems.push_back("catalog source '" + src.id + "' appears twice");
      c.catalog.push_back(std::move(src));
    }
  } catch (const json::exception& e) {
    problems.push_back(e.what());
  }
  if (!problems.empty()) throw Error(ErrorCode::kValidation, "invalid service configuration", problems);
  return c;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot read config " + path.string());
  try {
    return parse_config(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSyntax, "config " + path.string() + ": " + e.what());
  }
}

}  // namespace agriflow::api
