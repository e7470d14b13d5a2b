#pragma once

#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agriflow/api/config.hpp"
#include "agriflow/error.hpp"
#include "agriflow/platform.hpp"

namespace agriflow::api {

inline constexpr const char* kApiPrefix = "/api/v1";

struct FormPart {
  std::string content;
  std::string filename;
  std::string content_type;
};

/// Transport-neutral HTTP request. Header names are matched case-insensitively.
struct Request {
  std::string method = "GET";
  std::string target;  // path, optionally with "?query"
  std::map<std::string, std::string> headers;
  std::map<std::string, std::string> query;
  std::string body;
  std::map<std::string, FormPart> parts;  // multipart/form-data fields

  std::string header(std::string_view name) const;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

/// Documented access rule of one endpoint. Empty `roles` means any
/// authenticated user; `public_route` means no authentication at all.
struct RouteSpec {
  std::string method;
  std::string pattern;  // "/tasks/{id}/complete", relative to kApiPrefix
  std::set<Role> roles;
  bool mutating = false;
  bool public_route = false;
};

const std::vector<RouteSpec>& route_table();

/// Maps an Error to its HTTP status.
int http_status(ErrorCode code) noexcept;

/// Uniform {code, message, details[]} error body.
nlohmann::json error_envelope(const std::string& code, const std::string& message,
                              const std::vector<std::string>& details = {});

/// The REST surface over one Platform. Stateless between requests; safe to
/// call from many threads.
class Router {
 public:
  Router(Platform& platform, const ServiceConfig& config);
  Response handle(const Request& request) const;

 private:
  Platform& platform_;
  const ServiceConfig& config_;
};

}  // namespace agriflow::api
