#pragma once

#include <memory>
#include <string>

#include "agriflow/api/router.hpp"

namespace agriflow::api {

// Serves a Router over HTTP/1.1. Multipart uploads arrive in Request::parts.
class HttpServer {
 public:
  explicit HttpServer(const Router& router);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws on failure.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called from another thread.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace agriflow::api
