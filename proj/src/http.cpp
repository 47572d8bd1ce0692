#include <httplib.h>

#include "simml/service.hpp"

namespace simml::service {

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;

  explicit Impl(Service& s) : service(s) {
    server.set_payload_max_length(s.options().max_body);
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      Response r = service.dispatch(Request{req.method, req.path, req.body});
      res.status = r.status;
      if (!r.body.empty() || !r.content_type.empty()) res.set_content(r.body, r.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Put(".*", handler);
    server.Patch(".*", handler);
    server.Delete(".*", handler);
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::listen(const std::string& host, int port, const std::function<void(int)>& ready) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) return false;
  } else if (!impl_->server.bind_to_port(host, port)) {
    return false;
  }
  if (ready) ready(bound);
  return impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace simml::service
