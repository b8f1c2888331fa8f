#include "gendetect/detect_service.hpp"

#include "httplib.h"

namespace gendetect {

struct HttpServer::Impl {
  explicit Impl(DetectService& s) : service(s) {}

  DetectService& service;
  httplib::Server server;
};

HttpServer::HttpServer(DetectService& service) : impl_(std::make_unique<Impl>(service)) {
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    ServiceRequest r;
    r.method = req.method;
    r.path = req.path;
    r.body = req.body;
    r.client_id = req.has_header("X-Api-Key") ? "key:" + req.get_header_value("X-Api-Key")
                                               : "addr:" + req.remote_addr;
    const ServiceResponse out = impl_->service.handle(r);
    res.status = out.status;
    if (out.retry_after) res.set_header("Retry-After", std::to_string(*out.retry_after));
    res.set_content(out.body, "application/json");
  };
  for (const char* path : {"/generations", "/detect", "/admin/reindex", "/healthz"}) {
    impl_->server.Get(path, route);
    impl_->server.Post(path, route);
  }
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int HttpServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::is_running() const { return impl_->server.is_running(); }

}  // namespace gendetect
