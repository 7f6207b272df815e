#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hg/ctm/service.hpp"
#include "hg/net/http_client.hpp"

namespace hg::worker {

struct WorkerDescriptor {
  std::string worker_kind;
  std::string accepted_schema;
  std::string result_schema;
  int concurrency = 1;
};

// A datapoint with its payload loaded and parsed, plus the test params.
struct PreparedInput {
  Datapoint datapoint;
  Json document;
  Json params = Json::object();
};

// Pure transformation; throw hg::Error to report an analytic failure.
using AnalyticFn = std::function<Json(const PreparedInput&)>;

// Where a worker gets jobs from and sends results to.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::optional<ctm::ClaimedJob> claim(const std::string& worker_kind,
                                               std::int64_t lease_ms) = 0;
  virtual std::vector<std::uint8_t> fetch_object(const std::string& sha256) = 0;
  virtual void submit(const ctm::ResultSubmission& submission) = 0;
  virtual queue::JobState ack(const std::string& job_id, int lease_attempts,
                              queue::Outcome outcome, const std::string& reason) = 0;
};

class LocalBackend final : public Backend {
 public:
  LocalBackend(ctm::CtmService& service, Credential credential)
      : service_(service), credential_(std::move(credential)) {}

  std::optional<ctm::ClaimedJob> claim(const std::string& worker_kind,
                                       std::int64_t lease_ms) override;
  std::vector<std::uint8_t> fetch_object(const std::string& sha256) override;
  void submit(const ctm::ResultSubmission& submission) override;
  queue::JobState ack(const std::string& job_id, int lease_attempts, queue::Outcome outcome,
                      const std::string& reason) override;

 private:
  ctm::CtmService& service_;
  Credential credential_;
};

class HttpBackend final : public Backend {
 public:
  HttpBackend(std::string server_url, std::string token)
      : client_(std::move(server_url), std::move(token)) {}

  std::optional<ctm::ClaimedJob> claim(const std::string& worker_kind,
                                       std::int64_t lease_ms) override;
  std::vector<std::uint8_t> fetch_object(const std::string& sha256) override;
  void submit(const ctm::ResultSubmission& submission) override;
  queue::JobState ack(const std::string& job_id, int lease_attempts, queue::Outcome outcome,
                      const std::string& reason) override;

 private:
  net::HttpClient client_;
};

// Loads the payload of a datapoint (inline text or stored object) and
// checks its schema tag. Throws SCHEMA_MISMATCH on a foreign document.
PreparedInput prepare(Backend& backend, const Datapoint& datapoint, const Test& test,
                      const std::string& accepted_schema);

struct StandardOptions {
  // TUG predictor file; the built-in linear model when absent.
  std::optional<std::filesystem::path> tug_model;
};

struct StandardWorker {
  WorkerDescriptor descriptor;
  AnalyticFn analytic;
};

// phq8, tug or sit_to_stand. Throws VALIDATION for other kinds and
// MODEL_NOT_FOUND for a missing model file.
StandardWorker standard_worker(const std::string& worker_kind, const StandardOptions& options = {});
std::vector<std::string> standard_worker_kinds();

struct WorkerOptions {
  int concurrency = 1;
  std::int64_t lease_ms = 60'000;
  std::int64_t idle_poll_ms = 250;
  std::int64_t backoff_base_ms = 500;
  std::int64_t backoff_cap_ms = 30'000;
  // In-flight jobs may finish for this long after stop is requested.
  std::int64_t drain_grace_ms = 30'000;
  // Return once a claim comes back empty.
  bool exit_when_idle = false;
  // Fault injection: sleep this long after each claim before processing.
  std::int64_t stall_ms = 0;
};

struct RunReport {
  std::int64_t processed = 0;  // jobs acked as success
  std::int64_t failed = 0;     // jobs acked as failure
  std::int64_t abandoned = 0;  // jobs left to lease expiry
  std::int64_t results = 0;    // result rows submitted
};

// Runs `concurrency` claim loops until `stop` becomes true (or the queue is
// idle with exit_when_idle). Each loop holds at most one lease.
RunReport run_worker(Backend& backend, const WorkerDescriptor& descriptor,
                     const AnalyticFn& analytic, const WorkerOptions& options,
                     const std::atomic<bool>& stop);

}  // namespace hg::worker
