#include <spdlog/spdlog.h>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <memory>

#include "cli.hpp"
#include "hg/common/clock.hpp"
#include "hg/common/error.hpp"
#include "hg/common/ids.hpp"
#include "hg/common/random.hpp"
#include "hg/common/time.hpp"
#include "hg/ctm/http_server.hpp"
#include "hg/ctm/service.hpp"
#include "hg/store/database.hpp"
#include "hg/store/object_store.hpp"

namespace hg::cli {
namespace {

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "./data";
  std::string db_path;
  std::string object_dir;
  double tick_secs = 5.0;
  std::string admin_token;
  std::string worker_token;
  std::string virtual_clock;
  std::string public_url;
};

Timestamp parse_start(const std::string& s) {
  if (s.size() == 10) return at(parse_date(s), TimeOfDay{0});
  return parse_timestamp(s);
}

std::string ensure_worker_token(const ServeOptions& o, const std::filesystem::path& dir) {
  if (!o.worker_token.empty()) return o.worker_token;
  const auto path = dir / "worker.token";
  if (std::ifstream in(path); in) {
    std::string token;
    std::getline(in, token);
    if (!token.empty()) return token;
  }
  IdGenerator ids(std::make_shared<SecureRandom>());
  std::string token = ids.token();
  std::ofstream(path) << token << "\n";
  std::filesystem::permissions(path, std::filesystem::perms::owner_read |
                                         std::filesystem::perms::owner_write);
  return token;
}

int serve(const ServeOptions& o) {
  const std::filesystem::path dir(o.data_dir);
  std::filesystem::create_directories(dir);
  const std::string db_path = o.db_path.empty() ? (dir / "hg.db").string() : o.db_path;
  const std::filesystem::path objects_dir = 
      o.object_dir.empty() ? dir / "objects" : std::filesystem::path(o.object_dir);

  // Block the shutdown signals before any thread starts so sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  store::Database db(db_path);
  store::FsObjectStore objects(objects_dir);
  IdGenerator ids(std::make_shared<SecureRandom>());
  std::unique_ptr<Clock> clock;
  ManualClock* manual = nullptr;
  if (!o.virtual_clock.empty()) {
    auto m = std::make_unique<ManualClock>(parse_start(o.virtual_clock));
    manual = m.get();
    clock = std::move(m);
  } else {
    clock = std::make_unique<SystemClock>();
  }

  ctm::ServiceOptions svc_opts;
  if (!o.admin_token.empty()) svc_opts.admin_token = o.admin_token;
  ctm::CtmService service(db, objects, ids, *clock, svc_opts);
  service.register_worker_token(ensure_worker_token(o, dir));

  ctm::ServerOptions srv;
  srv.host = o.host;
  srv.port = o.port;
  srv.tick_ms = static_cast<std::int64_t>(o.tick_secs * 1000.0);
  srv.public_url = o.public_url;
  ctm::HttpServer server(service, srv, manual);
  server.bind();
  server.start();
  spdlog::info("serving on {} (db {}, objects {}, {} clock)", server.url(), db_path,
               objects_dir.string(), manual ? "virtual" : "system");

  int sig = 0;
  sigwait(&signals, &sig);
  spdlog::info("signal {} received, shutting down", sig);
  server.stop();
  return kOk;
}

}  // namespace

void add_serve(CLI::App& app, Globals&, Action& action) {
  auto o = std::make_shared<ServeOptions>();
  auto* cmd = app.add_subcommand("serve", "Run the service, datastore, queue and scheduler");
  cmd->add_option("--host", o->host, "Listen address")->capture_default_str();
  cmd->add_option("--port", o->port, "Listen port (0 picks one)")
      ->envname("HG_PORT")
      ->capture_default_str();
  cmd->add_option("--data-dir", o->data_dir, "State directory, created if missing")
      ->capture_default_str();
  cmd->add_option("--db", o->db_path, "SQLite file (default <data-dir>/hg.db)")
      ->envname("HG_DB_PATH");
  cmd->add_option("--objects", o->object_dir, "Object directory (default <data-dir>/objects)")
      ->envname("HG_OBJECT_DIR");
  cmd->add_option("--tick-secs", o->tick_secs, "Scheduler period in seconds; 0 disables")
      ->envname("HG_SCHED_TICK_SECS")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--admin-token", o->admin_token, "Token required for study creation")
      ->envname("HG_ADMIN_TOKEN");
  cmd->add_option("--worker-token", o->worker_token,
                  "Worker token (default: read or generate <data-dir>/worker.token)")
      ->envname("HG_WORKER_TOKEN");
  cmd->add_option("--virtual-clock", o->virtual_clock,
                  "Start a settable clock at this date or timestamp");
  cmd->add_option("--public-url", o->public_url, "URL advertised by /v1/meta");
  cmd->callback([o, &action] { action = [o] { return serve(*o); }; });
}

}  // namespace hg::cli
