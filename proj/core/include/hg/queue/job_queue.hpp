#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hg/common/clock.hpp"
#include "hg/common/ids.hpp"
#include "hg/common/time.hpp"
#include "hg/domain/entities.hpp"
#include "hg/store/database.hpp"

namespace hg::queue {

enum class JobState { kReady, kLeased, kDone, kDead };

std::string_view to_string(JobState state);
JobState job_state_from_string(std::string_view text);

struct Job {
  std::string job_id;
  std::string dataset_id;
  std::string worker_kind;
  JobState state = JobState::kReady;
  int attempts = 0;
  int max_retries = 3;
  std::optional<Timestamp> lease_expires_at;
  Timestamp enqueued_at;
  std::optional<std::string> last_error;
};

Json to_json(const Job& job);

struct QueueOptions {
  std::int64_t default_lease_ms = 60'000;
  int max_retries = 3;
};

enum class Outcome { kSuccess, kFailure };

struct QueueCounts {
  std::int64_t ready = 0;
  std::int64_t leased = 0;
  std::int64_t done = 0;
  std::int64_t dead = 0;

  std::int64_t total() const { return ready + leased + done + dead; }
};

// Lease-based at-least-once queue persisted next to the entities. A lease
// token is the (job_id, attempts) pair handed out by claim().
class JobQueue {
 public:
  JobQueue(store::Database& db, IdGenerator& ids, const Clock& clock, QueueOptions options = {});

  static std::string_view schema();

  // Returns the live job for (dataset, kind) if one exists.
  Job enqueue(const std::string& dataset_id, const std::string& worker_kind);

  // Oldest ready job of the kind, now leased to the caller. Expired leases
  // of that kind are returned to ready (or dead) first.
  std::optional<Job> claim(const std::string& worker_kind, std::int64_t lease_ms);

  // Throws NOT_FOUND or STALE_LEASE.
  JobState ack(const std::string& job_id, int lease_attempts, Outcome outcome,
               const std::string& reason = {});

  // Applies lease expiry to every kind; returns the number of jobs moved.
  int reap_expired();

  std::optional<Job> find(const std::string& job_id) const;
  std::vector<Job> list(std::optional<JobState> state = std::nullopt,
                        std::optional<std::string> worker_kind = std::nullopt,
                        std::size_t limit = 1000) const;
  std::vector<Job> jobs_for_dataset(const std::string& dataset_id) const;
  QueueCounts counts(std::optional<std::string> worker_kind = std::nullopt) const;

  const QueueOptions& options() const { return options_; }

 private:
  int reap_locked(const std::optional<std::string>& worker_kind);

  store::Database& db_;
  IdGenerator& ids_;
  const Clock& clock_;
  QueueOptions options_;
};

}  // namespace hg::queue
