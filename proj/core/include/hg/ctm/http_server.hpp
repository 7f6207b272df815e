#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "hg/common/clock.hpp"
#include "hg/ctm/service.hpp"

namespace hg::ctm {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  // Wall-clock period of the background scheduler; 0 disables it.
  std::int64_t tick_ms = 5'000;
  // Advertised by /v1/meta; defaults to http://host:port.
  std::string public_url;
  int threads = 32;
};

// Serves the /v1 API for a CtmService. When a ManualClock is supplied the
// admin clock endpoints may move time; otherwise they report it only.
class HttpServer {
 public:
  HttpServer(CtmService& service, ServerOptions options, ManualClock* virtual_clock = nullptr);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds the listening socket; throws UNAVAILABLE when the port is taken.
  // Returns the bound port.
  int bind();
  // Serves on a background thread and starts the scheduler.
  void start();
  // Serves on the calling thread until stop().
  void run();
  void stop();

  int port() const;
  std::string url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hg::ctm
