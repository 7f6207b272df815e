#include "hg/ctm/http_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>

#include "hg/common/error.hpp"
#include "hg/domain/serialize.hpp"

namespace hg::ctm {
namespace {

struct Reply {
  Reply() = default;
  Reply(int s, Json b) : status(s), body(std::move(b)) {}

  int status = 200;
  Json body;
  bool no_content = false;
  std::optional<std::string> raw;  // sent as application/octet-stream
};

Reply created(Json body) { return {201, std::move(body)}; }

std::string bearer(const httplib::Request& req) {
  const std::string h = req.get_header_value("Authorization");
  constexpr std::string_view kPrefix = "Bearer ";
  if (h.size() > kPrefix.size() && h.compare(0, kPrefix.size(), kPrefix) == 0) {
    return h.substr(kPrefix.size());
  }
  return {};
}

Json body_of(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kValidation, "request body is not valid JSON");
  if (!j.is_object()) throw Error(ErrorCode::kValidation, "request body must be a JSON object");
  return j;
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  std::string v = req.get_param_value(name);
  if (v.empty()) return std::nullopt;
  return v;
}

std::optional<Timestamp> time_param(const httplib::Request& req, const char* name) {
  auto v = param(req, name);
  if (!v) return std::nullopt;
  auto ts = try_parse_timestamp(*v);
  if (!ts) throw Error(ErrorCode::kValidation, std::string(name) + " must be an ISO-8601 timestamp");
  return ts;
}

template <typename T>
Json array_of(const std::vector<T>& items) {
  Json out = Json::array();
  for (const auto& item : items) out.push_back(item);
  return out;
}

Json counts_json(const queue::QueueCounts& c) {
  return Json{{"ready", c.ready},
              {"leased", c.leased},
              {"done", c.done},
              {"dead", c.dead},
              {"total", c.total()}};
}

Json outcome_json(const IngestOutcome& o) {
  return Json{{"datapoint", o.datapoint}, {"dataset_id", o.dataset_id}, {"created", o.created}};
}

}  // namespace

struct HttpServer::Impl {
  CtmService& svc;
  ServerOptions options;
  ManualClock* virtual_clock;
  httplib::Server server;
  int bound_port = -1;
  std::thread listener;
  std::thread scheduler;
  std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;

  Impl(CtmService& s, ServerOptions o, ManualClock* vc)
      : svc(s), options(std::move(o)), virtual_clock(vc) {
    server.new_task_queue = [n = options.threads] {
      return new httplib::ThreadPool(static_cast<std::size_t>(n));
    };
    routes();
  }

  using Authed = std::function<Reply(const httplib::Request&, const Credential&)>;
  using Open = std::function<Reply(const httplib::Request&)>;

  static void send(httplib::Response& res, const Reply& r) {
    res.status = r.status;
    if (r.raw) {
      res.set_content(*r.raw, "application/octet-stream");
    } else if (!r.no_content) {
      res.set_content(r.body.dump(), "application/json");
    }
  }

  static void send_error(httplib::Response& res, ErrorCode code, const std::string& msg) {
    res.status = http_status(code);
    res.set_content(Json{{"code", to_string(code)}, {"message", msg}}.dump(), "application/json");
  }

  httplib::Server::Handler wrap(Open fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      try {
        send(res, fn(req));
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const Json::exception& e) {
        send_error(res, ErrorCode::kValidation, e.what());
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, ErrorCode::kInternal, e.what());
      }
    };
  }

  httplib::Server::Handler authed(Authed fn) {
    return wrap([this, fn = std::move(fn)](const httplib::Request& req) {
      return fn(req, svc.authenticate(bearer(req)));
    });
  }

  // Study routes: the credential must belong to the study in the path,
  // checked before any body is parsed.
  httplib::Server::Handler scoped(Authed fn) {
    return authed([fn = std::move(fn)](const httplib::Request& req, const Credential& who) {
      if (who.study_id != req.matches[1].str()) {
        throw Error(ErrorCode::kForbidden, "credential is not scoped to this study");
      }
      return fn(req, who);
    });
  }

  void require_admin(const httplib::Request& req) const {
    if (!svc.admin_required()) return;
    const std::string token = bearer(req);
    if (token.empty()) throw Error(ErrorCode::kUnauthorized, "admin token required");
    if (!svc.is_admin(token)) throw Error(ErrorCode::kForbidden, "admin token required");
  }

  std::string public_url() const {
    if (!options.public_url.empty()) return options.public_url;
    return "http://" + options.host + ":" + std::to_string(bound_port);
  }

  void routes();
  void scheduler_loop();
};

void HttpServer::Impl::routes() {
  auto& s = server;
  const std::string study = R"(/v1/studies/([^/]+))";

  s.Get("/v1/healthz", wrap([](const httplib::Request&) {
          return Reply{200, Json{{"status", "ok"}}};
        }));
  s.Get("/v1/meta", wrap([this](const httplib::Request&) {
          return Reply{200, Json{{"server_url", public_url()},
                                 {"tick_secs", static_cast<double>(options.tick_ms) / 1000.0},
                                 {"virtual_clock", virtual_clock != nullptr},
                                 {"now", format_timestamp(svc.clock().now())}}};
        }));

  // Admin.
  s.Get("/v1/admin/clock", wrap([this](const httplib::Request& req) {
          require_admin(req);
          return Reply{200, Json{{"now", format_timestamp(svc.clock().now())},
                                 {"virtual", virtual_clock != nullptr}}};
        }));
  s.Post("/v1/admin/clock", wrap([this](const httplib::Request& req) {
           require_admin(req);
           if (!virtual_clock) throw Error(ErrorCode::kForbidden, "server runs on the system clock");
           auto ts = try_parse_timestamp(require_string(body_of(req), "now"));
           if (!ts) throw Error(ErrorCode::kValidation, "now must be an ISO-8601 timestamp");
           virtual_clock->set(*ts);
           return Reply{200, to_json(svc.tick())};
         }));
  s.Post("/v1/admin/tick", wrap([this](const httplib::Request& req) {
           require_admin(req);
           return Reply{200, to_json(svc.tick())};
         }));

  // Studies and subjects.
  s.Post("/v1/studies", wrap([this](const httplib::Request& req) {
           require_admin(req);
           return created(to_json(svc.create_study(require_string(body_of(req), "name"))));
         }));
  s.Get("/v1/studies", authed([this](const httplib::Request&, const Credential& who) {
          return Reply{200, Json{{"studies", array_of(svc.list_studies(who))}}};
        }));
  s.Get(study, scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, Json(svc.get_study(who, req.matches[1]))};
        }));
  s.Post(study + "/subjects", scoped([this](const httplib::Request& req, const Credential& who) {
           auto out = svc.enroll_subject(who, req.matches[1], parse_enrollment(body_of(req)));
           return Reply{out.created ? 201 : 200, to_json(out)};
         }));
  s.Get(study + "/subjects", scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, Json{{"subjects", array_of(svc.list_subjects(who, req.matches[1]))}}};
        }));
  s.Post(study + R"(/subjects/([^/]+)/device-token)",
         scoped([this](const httplib::Request& req, const Credential& who) {
           return created(
               Json{{"device_token", svc.issue_device_token(who, req.matches[1], req.matches[2])}});
         }));

  // Cohorts, test-sets, tasks.
  s.Post(study + "/cohorts", scoped([this](const httplib::Request& req, const Credential& who) {
           Json b = body_of(req);
           auto selector = parse_selector(require_field(b, "selector"));
           return created(Json(svc.define_cohort(who, req.matches[1], require_string(b, "name"),
                                                 selector)));
         }));
  s.Get(study + "/cohorts", scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, Json{{"cohorts", array_of(svc.list_cohorts(who, req.matches[1]))}}};
        }));
  s.Post(study + "/testsets", scoped([this](const httplib::Request& req, const Credential& who) {
           Json b = body_of(req);
           const Json& tests = require_field(b, "tests");
           if (!tests.is_array()) throw Error(ErrorCode::kValidation, "tests must be a list");
           std::vector<TestDraft> drafts;
           for (const auto& t : tests) drafts.push_back(parse_test_draft(t));
           return created(
               Json(svc.create_testset(who, req.matches[1], require_string(b, "name"), drafts)));
         }));
  s.Get(study + "/testsets", scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, Json{{"testsets", array_of(svc.list_testsets(who, req.matches[1]))}}};
        }));
  s.Post(study + "/tasks", scoped([this](const httplib::Request& req, const Credential& who) {
           Json b = body_of(req);
           auto schedule = require_field(b, "schedule").get<Schedule>();
           return created(to_json(svc.create_task(who, req.matches[1],
                                                  require_string(b, "testset_id"),
                                                  require_string(b, "cohort_id"), schedule)));
         }));
  s.Get(study + "/tasks", scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, Json{{"tasks", array_of(svc.list_tasks(who, req.matches[1]))}}};
        }));
  s.Get(study + "/occurrences", scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, Json{{"occurrences",
                                  array_of(svc.list_occurrences(who, req.matches[1]))}}};
        }));

  // Rules.
  s.Post(study + "/rules", scoped([this](const httplib::Request& req, const Credential& who) {
           return created(Json(svc.create_rule(who, req.matches[1], parse_rule_draft(body_of(req)))));
         }));
  s.Get(study + "/rules", scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, Json{{"rules", array_of(svc.list_rules(who, req.matches[1]))}}};
        }));
  s.Post(study + R"(/rules/([^/]+)/evaluate)",
         scoped([this](const httplib::Request& req, const Credential& who) {
           Json b = body_of(req);
           std::optional<Date> day;
           if (b.contains("day")) day = parse_date(require_string(b, "day"));
           return Reply{200, to_json(svc.evaluate_rule(who, req.matches[1], req.matches[2], day))};
         }));

  // Results gateway and exports.
  s.Get(study + "/results", scoped([this](const httplib::Request& req, const Credential& who) {
          store::ResultQuery q;
          q.study_id = req.matches[1];
          q.subject_id = param(req, "subject");
          q.test_id = param(req, "test");
          q.worker_kind = param(req, "kind");
          q.from = time_param(req, "from");
          q.to = time_param(req, "to");
          return Reply{200, Json{{"results", array_of(svc.fetch_results(who, q))}}};
        }));
  s.Get(study + "/datapoints", scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, Json{{"datapoints",
                                  array_of(svc.list_datapoints(who, req.matches[1]))}}};
        }));
  s.Get(study + "/datasets", scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, Json{{"datasets", array_of(svc.list_datasets(who, req.matches[1]))}}};
        }));
  s.Get(study + "/vault", scoped([this](const httplib::Request& req, const Credential& who) {
          Json entries = Json::array();
          for (const auto& e : svc.export_vault(who, req.matches[1])) {
            entries.push_back({{"raw_id", e.raw_id}, {"pseudonym", e.pseudonym}});
          }
          return Reply{200, Json{{"study_id", req.matches[1].str()}, {"entries", entries}}};
        }));
  s.Get(study + "/board", scoped([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, svc.study_board(who, req.matches[1])};
        }));

  // Devices.
  s.Get(R"(/v1/devices/([^/]+)/pending-tasks)",
        authed([this](const httplib::Request& req, const Credential& who) {
          Json tasks = Json::array();
          for (const auto& p : svc.poll_tasks(who, req.matches[1], time_param(req, "now"))) {
            tasks.push_back(to_json(p));
          }
          return Reply{200, Json{{"tasks", std::move(tasks)}}};
        }));
  s.Post(R"(/v1/devices/([^/]+)/uploads)",
         authed([this](const httplib::Request& req, const Credential& who) {
           svc.authorize_device(who, req.matches[1]);
           auto out = svc.upload(who, req.matches[1], parse_envelope(body_of(req)));
           return Reply{out.created ? 201 : 200, outcome_json(out)};
         }));

  // Workers.
  s.Post("/v1/internal/results", authed([this](const httplib::Request& req, const Credential& who) {
           return created(Json(svc.submit_result(who, parse_result_submission(body_of(req)))));
         }));
  s.Get(R"(/v1/internal/objects/([0-9a-zA-Z./_-]+))",
        wrap([this](const httplib::Request& req) {
          auto bytes = svc.get_object(svc.authenticate(bearer(req)), req.matches[1]);
          Reply r;
          r.raw = std::string(bytes.begin(), bytes.end());
          return r;
        }));
  s.Get(R"(/v1/internal/datasets/([^/]+))",
        authed([this](const httplib::Request& req, const Credential& who) {
          return Reply{200, to_json(svc.describe_dataset(who, req.matches[1]))};
        }));
  s.Post(R"(/v1/internal/datasets/([^/]+)/publish)",
         authed([this](const httplib::Request& req, const Credential& who) {
           return Reply{200, Json{{"published", svc.flush_dataset(who, req.matches[1])}}};
         }));
  s.Post("/v1/queue/claim", authed([this](const httplib::Request& req, const Credential& who) {
           Json b = body_of(req);
           const double lease_secs = b.contains("lease_secs") ? require_number(b, "lease_secs") : 60;
           if (!(lease_secs > 0)) throw Error(ErrorCode::kValidation, "lease_secs must be positive");
           auto job = svc.claim(who, require_string(b, "worker_kind"),
                                static_cast<std::int64_t>(lease_secs * 1000.0));
           if (!job) {
            Reply none{204, Json()};
            none.no_content = true;
            return none;
          }
           return Reply{200, to_json(*job)};
         }));
  s.Post(R"(/v1/queue/([^/]+)/ack)", authed([this](const httplib::Request& req,
                                                    const Credential& who) {
           Json b = body_of(req);
           const std::string outcome = require_string(b, "outcome");
           if (outcome != "success" && outcome != "failure") {
             throw Error(ErrorCode::kValidation, "outcome must be success or failure");
           }
           auto state = svc.ack(who, req.matches[1], static_cast<int>(require_number(b, "lease_attempts")),
                                outcome == "success" ? queue::Outcome::kSuccess
                                                     : queue::Outcome::kFailure,
                                b.value("reason", std::string()));
           return Reply{200, Json{{"job_id", req.matches[1].str()}, {"state", to_string(state)}}};
         }));
  s.Get("/v1/queue/jobs", authed([this](const httplib::Request& req, const Credential& who) {
          std::optional<queue::JobState> state;
          if (auto v = param(req, "state")) state = queue::job_state_from_string(*v);
          Json jobs = Json::array();
          for (const auto& j : svc.list_jobs(who, state, param(req, "kind"))) jobs.push_back(to_json(j));
          return Reply{200, Json{{"jobs", std::move(jobs)}}};
        }));
  s.Get("/v1/queue/stats", authed([this](const httplib::Request&, const Credential& who) {
          Json out = counts_json(svc.queue_counts(who));
          Json kinds = Json::object();
          for (const char* k : {"phq8", "tug", "sit_to_stand"}) {
            kinds[k] = counts_json(svc.job_queue().counts(std::string(k)));
          }
          out["by_kind"] = std::move(kinds);
          return Reply{200, out};
        }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) send_error(res, ErrorCode::kNotFound, "no such endpoint");
  });
}

void HttpServer::Impl::scheduler_loop() {
  std::unique_lock lock(mu);
  while (!stopping) {
    cv.wait_for(lock, std::chrono::milliseconds(options.tick_ms));
    if (stopping) break;
    lock.unlock();
    try {
      auto r = svc.tick();
      if (r.materialized || r.expired || r.published || r.rule_runs) {
        spdlog::info("tick {}: materialized={} expired={} published={} rule_runs={}",
                     format_timestamp(r.now), r.materialized, r.expired, r.published, r.rule_runs);
      }
    } catch (const std::exception& e) {
      spdlog::error("scheduler tick failed: {}", e.what());
    }
    lock.lock();
  }
}

HttpServer::HttpServer(CtmService& service, ServerOptions options, ManualClock* virtual_clock)
    : impl_(std::make_unique<Impl>(service, std::move(options), virtual_clock)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (impl_->bound_port >= 0) return impl_->bound_port;
  const auto& o = impl_->options;
  int port = o.port;
  // Plain SO_REUSEADDR: the library default adds SO_REUSEPORT, which would
  // let a second server share a busy port.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  if (o.port == 0) {
    port = impl_->server.bind_to_any_port(o.host);
  } else if (!impl_->server.bind_to_port(o.host, o.port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error(ErrorCode::kUnavailable, "cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  impl_->bound_port = port;
  return port;
}

void HttpServer::start() {
  bind();
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  if (impl_->options.tick_ms > 0) {
    impl_->scheduler = std::thread([this] { impl_->scheduler_loop(); });
  }
}

void HttpServer::run() {
  bind();
  if (impl_->options.tick_ms > 0) {
    impl_->scheduler = std::thread([this] { impl_->scheduler_loop(); });
  }
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  {
    std::lock_guard lock(impl_->mu);
    if (impl_->stopping) return;
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  if (impl_->scheduler.joinable()) impl_->scheduler.join();
}

int HttpServer::port() const { return impl_->bound_port; }

std::string HttpServer::url() const {
  return "http://" + impl_->options.host + ":" + std::to_string(impl_->bound_port);
}

}  // namespace hg::ctm
