#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "tutor/server.hpp"

namespace tutor {

/// REST and the per-session WebSocket event stream on one port.
/// Request handling runs on a worker pool so a slow turn never stalls I/O.
class HttpServer {
 public:
  HttpServer(TutorService& service, std::string bind_address, std::uint16_t port,
             unsigned io_threads = 2, unsigned worker_threads = 4);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  void start();
  void stop();
  std::uint16_t port() const;  // actual port once started (useful with port 0)

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tutor
