#include "sentinel/server.hpp"

#include "httplib.h"

namespace sentinel {

bool split_hostport(const std::string& addr, std::string* host, int* port) {
  std::size_t colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
    return false;
  *host = addr.substr(0, colon);
  try {
    *port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    return false;
  }
  return *port >= 0 && *port <= 65535;
}

GatewayServer::GatewayServer(Gateway& gateway, Clock& clock)
    : gateway_(gateway), clock_(clock) {}

GatewayServer::~GatewayServer() { stop(); }

void GatewayServer::wire(httplib::Server& srv, Binding binding) {
  // Catch-all routes rather than a pre-routing hook: the library only
  // reads request bodies for matched routes, and the gateway needs them.
  auto forward = [this, binding](const httplib::Request& req,
                                 httplib::Response& res) {
    RawRequest raw;
    raw.source = req.remote_addr + ":" + std::to_string(req.remote_port);
    raw.path = req.target;  // raw target; the gateway decodes once
    for (const auto& kv : req.headers) {
      if (kv.first == "REMOTE_ADDR" || kv.first == "REMOTE_PORT") continue;
      raw.headers.emplace_back(kv.first, kv.second);
    }
    raw.body = req.body;
    if (req.has_header("x-ims-cert"))
      raw.certificate = req.get_header_value("x-ims-cert");

    const Millis now = clock_.now_ms();
    HandleResult hr = req.path == "/auth/login"
                          ? gateway_.login(raw, now, binding)
                          : gateway_.handle(raw, now, binding);
    res.status = hr.response.status;
    res.set_content(hr.response.body, hr.response.content_type);
  };
  srv.Get(".*", forward);
  srv.Post(".*", forward);
  srv.Put(".*", forward);
  srv.Delete(".*", forward);
}

bool GatewayServer::start(const std::string& public_addr,
                          const std::string& admin_addr, std::string* err) {
  std::string host;
  int port = 0;
  if (!split_hostport(public_addr, &host, &port)) {
    if (err) *err = "bad listen address \"" + public_addr + "\"";
    return false;
  }
  public_srv_ = std::make_unique<httplib::Server>();
  wire(*public_srv_, Binding::Public);
  if (port == 0) {
    public_port_ = public_srv_->bind_to_any_port(host);
    if (public_port_ <= 0) {
      if (err) *err = "cannot bind " + public_addr;
      return false;
    }
  } else {
    if (!public_srv_->bind_to_port(host, port)) {
      if (err) *err = "cannot bind " + public_addr;
      return false;
    }
    public_port_ = port;
  }
  public_thread_ = std::thread([this] { public_srv_->listen_after_bind(); });

  if (!admin_addr.empty()) {
    if (!split_hostport(admin_addr, &host, &port)) {
      if (err) *err = "bad admin listen address \"" + admin_addr + "\"";
      stop();
      return false;
    }
    admin_srv_ = std::make_unique<httplib::Server>();
    wire(*admin_srv_, Binding::Admin);
    if (port == 0) {
      admin_port_ = admin_srv_->bind_to_any_port(host);
      if (admin_port_ <= 0) {
        if (err) *err = "cannot bind " + admin_addr;
        stop();
        return false;
      }
    } else {
      if (!admin_srv_->bind_to_port(host, port)) {
        if (err) *err = "cannot bind " + admin_addr;
        stop();
        return false;
      }
      admin_port_ = port;
    }
    admin_thread_ = std::thread([this] { admin_srv_->listen_after_bind(); });
  }
  return true;
}

void GatewayServer::stop() {
  if (public_srv_) public_srv_->stop();
  if (admin_srv_) admin_srv_->stop();
  if (public_thread_.joinable()) public_thread_.join();
  if (admin_thread_.joinable()) admin_thread_.join();
  public_srv_.reset();
  admin_srv_.reset();
}

}  // namespace sentinel
