#include "hg/worker/worker.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "hg/analytics/phq8.hpp"
#include "hg/analytics/sts.hpp"
#include "hg/analytics/tug.hpp"
#include "hg/common/error.hpp"

namespace hg::worker {

std::optional<ctm::ClaimedJob> LocalBackend::claim(const std::string& worker_kind,
                                                   std::int64_t lease_ms) {
  return service_.claim(credential_, worker_kind, lease_ms);
}

std::vector<std::uint8_t> LocalBackend::fetch_object(const std::string& sha256) {
  return service_.get_object(credential_, sha256);
}

void LocalBackend::submit(const ctm::ResultSubmission& submission) {
  service_.submit_result(credential_, submission);
}

queue::JobState LocalBackend::ack(const std::string& job_id, int lease_attempts,
                                  queue::Outcome outcome, const std::string& reason) {
  return service_.ack(credential_, job_id, lease_attempts, outcome, reason);
}

std::optional<ctm::ClaimedJob> HttpBackend::claim(const std::string& worker_kind,
                                                  std::int64_t lease_ms) {
  auto body = client_.post("/v1/queue/claim",
                           {{"worker_kind", worker_kind},
                            {"lease_secs", static_cast<double>(lease_ms) / 1000.0}});
  if (!body) return std::nullopt;
  return ctm::parse_claimed_job(*body);
}

std::vector<std::uint8_t> HttpBackend::fetch_object(const std::string& sha256) {
  return client_.get_bytes("/v1/internal/objects/" + sha256);
}

void HttpBackend::submit(const ctm::ResultSubmission& s) {
  client_.post("/v1/internal/results", {{"dataset_id", s.dataset_id},
                                        {"datapoint_id", s.datapoint_id},
                                        {"worker_kind", s.worker_kind},
                                        {"body", s.body}});
}

queue::JobState HttpBackend::ack(const std::string& job_id, int lease_attempts,
                                 queue::Outcome outcome, const std::string& reason) {
  auto body = client_.post("/v1/queue/" + job_id + "/ack",
                           {{"outcome", outcome == queue::Outcome::kSuccess ? "success" : "failure"},
                            {"lease_attempts", lease_attempts},
                            {"reason", reason}});
  return queue::job_state_from_string(body->at("state").get<std::string>());
}

PreparedInput prepare(Backend& backend, const Datapoint& datapoint, const Test& test,
                      const std::string& accepted_schema) {
  PreparedInput in{datapoint, Json(), test.params};
  switch (datapoint.payload.kind) {
    case PayloadKind::kText:
      in.document = Json::parse(datapoint.payload.text, nullptr, false);
      break;
    case PayloadKind::kFile: {
      auto bytes = backend.fetch_object(datapoint.payload.file.sha256);
      in.document = Json::parse(bytes.begin(), bytes.end(), nullptr, false);
      break;
    }
    case PayloadKind::kScalar:
      in.document = Json{{"value", datapoint.payload.scalar}};
      return in;
  }
  if (in.document.is_discarded()) {
    throw Error(ErrorCode::kSchemaMismatch, datapoint.datapoint_id + ": payload is not JSON");
  }
  if (!in.document.is_object() || in.document.value("schema", std::string()) != accepted_schema) {
    throw Error(ErrorCode::kSchemaMismatch,
                datapoint.datapoint_id + ": expected a " + accepted_schema + " document");
  }
  return in;
}

std::vector<std::string> standard_worker_kinds() { return {"phq8", "tug", "sit_to_stand"}; }

StandardWorker standard_worker(const std::string& worker_kind, const StandardOptions& options) {
  if (worker_kind == "phq8") {
    return {{"phq8", "phq8/v1", "phq8.result/v1", 1}, [](const PreparedInput& in) {
              auto doc = analytics::parse_phq8_document(in.document);
              return analytics::to_result_body(analytics::score_phq8(doc.response));
            }};
  }
  if (worker_kind == "tug") {
    std::shared_ptr<const analytics::TugPredictor> model =
        options.tug_model ? analytics::load_tug_model(*options.tug_model)
                          : analytics::default_tug_model();
    return {{"tug", "accel/v1", "tug.result/v1", 1}, [model](const PreparedInput& in) {
              auto trace = analytics::parse_accel_document(in.document);
              auto predictions = analytics::analyze_trace(trace, *model);
              return analytics::tug_result_body(predictions);
            }};
  }
  if (worker_kind == "sit_to_stand") {
    return {{"sit_to_stand", "pose2d/v1", "sts.result/v1", 1}, [](const PreparedInput& in) {
              auto pose = analytics::parse_pose_document(in.document);
              return analytics::sts_result_body(analytics::analyze_pose(pose));
            }};
  }
  throw Error(ErrorCode::kValidation, "unknown worker kind '" + worker_kind + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

bool is_infra(const Error& e) { return e.code() == ErrorCode::kUnavailable; }

class Loop {
 public:
  Loop(Backend& backend, const WorkerDescriptor& descriptor, const AnalyticFn& analytic,
       const WorkerOptions& options, const std::atomic<bool>& stop)
      : backend_(backend), d_(descriptor), analytic_(analytic), o_(options), stop_(stop) {}

  RunReport run() {
    std::vector<std::thread> threads;
    const int n = std::max(1, o_.concurrency);
    running_ = n;
    for (int i = 0; i < n; ++i) threads.emplace_back([this] { claim_loop(); });
    std::thread watcher([this] {
      std::unique_lock lock(mu_);
      while (!stop_.load() && running_ > 0) cv_.wait_for(lock, std::chrono::milliseconds(50));
      if (running_ > 0) drain_deadline_ = Clock::now() + std::chrono::milliseconds(o_.drain_grace_ms);
      cv_.notify_all();
    });
    for (auto& t : threads) t.join();
    watcher.join();
    return report_;
  }

 private:
  bool stopping() const { return stop_.load(); }

  bool past_grace() {
    std::lock_guard lock(mu_);
    return drain_deadline_ && Clock::now() > *drain_deadline_;
  }

  // Sleeps up to ms, waking early on stop.
  void nap(std::int64_t ms) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, std::chrono::milliseconds(ms), [this] { return stopping(); });
  }

  template <typename Fn>
  auto with_retry(Fn&& fn) -> decltype(fn()) {
    std::int64_t delay = o_.backoff_base_ms;
    while (true) {
      try {
        return fn();
      } catch (const Error& e) {
        if (!is_infra(e) || past_grace()) throw;
        spdlog::warn("{} worker: {} (retrying in {} ms)", d_.worker_kind, e.what(), delay);
        if (stopping()) {
          std::this_thread::sleep_for(std::chrono::milliseconds(std::min<std::int64_t>(delay, 200)));
        } else {
          nap(delay);
        }
        delay = std::min(delay * 2, o_.backoff_cap_ms);
      }
    }
  }

  void claim_loop() {
    std::int64_t delay = o_.backoff_base_ms;
    while (!stopping()) {
      std::optional<ctm::ClaimedJob> job;
      try {
        job = backend_.claim(d_.worker_kind, o_.lease_ms);
        delay = o_.backoff_base_ms;
      } catch (const Error& e) {
        if (!is_infra(e)) spdlog::error("{} worker: claim failed: {}", d_.worker_kind, e.what());
        nap(delay);
        delay = std::min(delay * 2, o_.backoff_cap_ms);
        continue;
      }
      if (!job) {
        if (o_.exit_when_idle) break;
        nap(o_.idle_poll_ms);
        continue;
      }
      if (o_.stall_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(o_.stall_ms));
      process(*job);
    }
    std::lock_guard lock(mu_);
    --running_;
    cv_.notify_all();
  }

  void process(const ctm::ClaimedJob& claimed) {
    const auto& job = claimed.job;
    std::vector<std::string> errors;
    std::int64_t submitted = 0;
    try {
      for (const auto& dp : claimed.dataset.datapoints) {
        Json body;
        try {
          auto input = with_retry(
              [&] { return prepare(backend_, dp, claimed.dataset.test, d_.accepted_schema); });
          body = analytic_(input);
        } catch (const Error& e) {
          if (is_infra(e)) throw;
          errors.push_back(dp.datapoint_id + ": " + std::string(to_string(e.code())) + ": " +
                           e.what());
          continue;
        } catch (const std::exception& e) {
          errors.push_back(dp.datapoint_id + ": " + e.what());
          continue;
        }
        with_retry([&] {
          backend_.submit({job.dataset_id, dp.datapoint_id, d_.worker_kind, body});
          return 0;
        });
        ++submitted;
      }
      const bool ok = errors.empty();
      std::string reason;
      for (const auto& e : errors) reason += (reason.empty() ? "" : "; ") + e;
      with_retry([&] {
        return backend_.ack(job.job_id, job.attempts,
                            ok ? queue::Outcome::kSuccess : queue::Outcome::kFailure, reason);
      });
      std::lock_guard lock(mu_);
      (ok ? report_.processed : report_.failed) += 1;
      report_.results += submitted;
    } catch (const Error& e) {
      // Left for lease expiry: the job is redelivered to someone else.
      spdlog::warn("{} worker: abandoning {}: {}", d_.worker_kind, job.job_id, e.what());
      std::lock_guard lock(mu_);
      ++report_.abandoned;
      report_.results += submitted;
    }
  }

  Backend& backend_;
  const WorkerDescriptor& d_;
  const AnalyticFn& analytic_;
  const WorkerOptions& o_;
  const std::atomic<bool>& stop_;

  std::mutex mu_;
  std::condition_variable cv_;
  int running_ = 0;
  std::optional<Clock::time_point> drain_deadline_;
  RunReport report_;
};

}  // namespace

RunReport run_worker(Backend& backend, const WorkerDescriptor& descriptor,
                     const AnalyticFn& analytic, const WorkerOptions& options,
                     const std::atomic<bool>& stop) {
  return Loop(backend, descriptor, analytic, options, stop).run();
}

}  // namespace hg::worker
