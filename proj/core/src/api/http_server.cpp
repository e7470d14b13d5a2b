#include "agriflow/api/http_server.hpp"

#include <httplib.h>

#include "agriflow/error.hpp"

namespace agriflow::api {

struct HttpServer::Impl {
  const Router& router;
  httplib::Server server;

  explicit Impl(const Router& r) : router(r) {
    server.set_payload_max_length(64u << 20);
    auto handler = [this](const httplib::Request& in, httplib::Response& out) { dispatch(in, out); };
    const std::string any = R"(/.*)";
    server.Get(any, handler);
    server.Post(any, handler);
    server.Put(any, handler);
    server.Delete(any, handler);
    server.Patch(any, handler);
  }

  void dispatch(const httplib::Request& in, httplib::Response& out) const {
    Request req;
    req.method = in.method;
    req.target = in.path;
    for (const auto& [k, v] : in.params) req.query[k] = v;
    for (const auto& [k, v] : in.headers) req.headers[k] = v;
    req.body = in.body;
    for (const auto& [name, part] : in.files) req.parts[name] = FormPart{part.content, part.filename, part.content_type};
    const Response res = router.handle(req);
    out.status = res.status;
    out.set_content(res.body, res.content_type);
  }
};

HttpServer::HttpServer(const Router& router) : impl_(std::make_unique<Impl>(router)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound <= 0) throw Error(ErrorCode::kInvalidArgument, "cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace agriflow::api
