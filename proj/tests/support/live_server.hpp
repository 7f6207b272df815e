#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "hg/common/clock.hpp"
#include "hg/common/ids.hpp"
#include "hg/common/random.hpp"
#include "hg/ctm/http_server.hpp"
#include "hg/ctm/service.hpp"
#include "hg/store/database.hpp"
#include "hg/store/object_store.hpp"
#include "hg/worker/worker.hpp"

namespace hg::support {

inline std::filesystem::path fresh_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("hg_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// In-process server on a virtual clock with a loopback listener.
class LiveServer {
 public:
  static constexpr const char* kWorkerToken = "worker-token-for-tests";

  explicit LiveServer(std::uint64_t seed = 1, const std::string& db_path = ":memory:",
                      Timestamp start = at(parse_date("2024-01-01"), TimeOfDay{0}))
      : dir_(fresh_dir("server")),
        db_(db_path),
        objects_(dir_ / "objects"),
        ids_(std::make_shared<SeededRandom>(seed)),
        clock_(start),
        service_(db_, objects_, ids_, clock_) {
    service_.register_worker_token(kWorkerToken);
    ctm::ServerOptions options;
    options.port = 0;
    options.tick_ms = 0;
    server_ = std::make_unique<ctm::HttpServer>(service_, options, &clock_);
    server_->start();
  }

  ~LiveServer() {
    stop_workers();
    server_->stop();
    std::filesystem::remove_all(dir_);
  }

  std::string url() const { return server_->url(); }
  ctm::CtmService& service() { return service_; }
  ManualClock& clock() { return clock_; }
  store::FsObjectStore& objects() { return objects_; }
  const std::filesystem::path& dir() const { return dir_; }

  // Out-of-process style workers speaking HTTP, one thread per kind.
  void start_workers(const std::vector<std::string>& kinds, int concurrency = 2) {
    for (const auto& kind : kinds) {
      workers_.emplace_back([this, kind, concurrency] {
        worker::HttpBackend backend(url(), kWorkerToken);
        auto w = worker::standard_worker(kind);
        worker::WorkerOptions o;
        o.concurrency = concurrency;
        o.idle_poll_ms = 20;
        o.backoff_base_ms = 20;
        o.drain_grace_ms = 2'000;
        auto report = worker::run_worker(backend, w.descriptor, w.analytic, o, stop_);
        processed_ += report.processed;
        failed_ += report.failed;
      });
    }
  }

  void stop_workers() {
    stop_ = true;
    for (auto& t : workers_) t.join();
    workers_.clear();
  }

  std::int64_t processed() const { return processed_; }
  std::int64_t failed() const { return failed_; }

 private:
  std::filesystem::path dir_;
  store::Database db_;
  store::FsObjectStore objects_;
  IdGenerator ids_;
  ManualClock clock_;
  ctm::CtmService service_;
  std::unique_ptr<ctm::HttpServer> server_;
  std::atomic<bool> stop_{false};
  std::vector<std::thread> workers_;
  std::atomic<std::int64_t> processed_{0};
  std::atomic<std::int64_t> failed_{0};
};

}  // namespace hg::support
