#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agriflow/platform.hpp"
#include "agriflow/roles.hpp"

namespace agriflow::api {

struct User {
  std::string id;
  std::string name;
  std::set<Role> roles;
  std::set<std::string> groups;
  std::string token;  // static bearer token
};

/// One entry of the curated external-data catalog.
struct CatalogSource {
  std::string id;
  std::string title;
  std::optional<std::string> embed_url;
  std::optional<std::string> connector;
};

struct ServiceConfig {
  std::string listen = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> journal;
  std::optional<std::filesystem::path> snapshot;
  bool fsync = true;
  int poll_interval_ms = 500;
  engine::EngineOptions engine;
  conn::SimulationConfig simulation;
  std::optional<std::set<std::string>> connectors;
  std::vector<User> users;
  std::vector<CatalogSource> catalog;

  const User* user_by_token(std::string_view token) const;
  const User* user_by_id(std::string_view id) const;
  const CatalogSource* source(std::string_view id) const;

  /// Platform options for this configuration. Relative paths resolve
  /// against `base`.
  PlatformOptions platform_options(const std::filesystem::path& base = {}) const;
};

/// Parses the service config document. Throws Error(kValidation) with one
/// detail per problem (unknown role, duplicate token, ...).
ServiceConfig parse_config(const nlohmann::json& j);
ServiceConfig load_config(const std::filesystem::path& path);

}  // namespace agriflow::api
