#pragma once

#include <memory>
#include <string>
#include <thread>

#include "sentinel/clock.hpp"
#include "sentinel/gateway.hpp"

namespace httplib {
class Server;
}

namespace sentinel {

// HTTP face of the gateway: one public listener and an optional admin
// listener (loopback in the shipped configs) sharing the single pipeline.
// Every request target is forwarded raw, so the gateway performs the one
// canonical decode itself.
class GatewayServer {
 public:
  GatewayServer(Gateway& gateway, Clock& clock);
  ~GatewayServer();

  // host:port, port 0 = ephemeral. Empty admin address = no admin
  // listener. Returns false (with *err) when a bind fails.
  bool start(const std::string& public_addr, const std::string& admin_addr,
             std::string* err);
  void stop();

  int public_port() const { return public_port_; }
  int admin_port() const { return admin_port_; }

 private:
  void wire(httplib::Server& srv, Binding binding);

  Gateway& gateway_;
  Clock& clock_;
  std::unique_ptr<httplib::Server> public_srv_;
  std::unique_ptr<httplib::Server> admin_srv_;
  std::thread public_thread_;
  std::thread admin_thread_;
  int public_port_ = 0;
  int admin_port_ = 0;
};

// Splits "host:port"; returns false on malformed input.
bool split_hostport(const std::string& addr, std::string* host, int* port);

}  // namespace sentinel
