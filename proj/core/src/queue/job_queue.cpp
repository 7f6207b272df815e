#include "hg/queue/job_queue.hpp"

#include "hg/common/error.hpp"

namespace hg::queue {
namespace {

constexpr std::string_view kSchema = R"sql(
CREATE TABLE IF NOT EXISTS jobs (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  job_id TEXT NOT NULL UNIQUE,
  dataset_id TEXT NOT NULL,
  worker_kind TEXT NOT NULL,
  state TEXT NOT NULL,
  attempts INTEGER NOT NULL DEFAULT 0,
  max_retries INTEGER NOT NULL,
  lease_expires_at INTEGER,
  enqueued_at INTEGER NOT NULL,
  last_error TEXT
);
CREATE UNIQUE INDEX IF NOT EXISTS jobs_live
  ON jobs(dataset_id, worker_kind) WHERE state IN ('ready', 'leased');
CREATE INDEX IF NOT EXISTS jobs_ready ON jobs(worker_kind, state, enqueued_at, seq);
CREATE INDEX IF NOT EXISTS jobs_dataset ON jobs(dataset_id);
)sql";

constexpr const char* kColumns =
    "job_id, dataset_id, worker_kind, state, attempts, max_retries, lease_expires_at, "
    "enqueued_at, last_error";

Job read_job(const store::Statement& st) {
  Job j;
  j.job_id = st.text(0);
  j.dataset_id = st.text(1);
  j.worker_kind = st.text(2);
  j.state = job_state_from_string(st.text(3));
  j.attempts = static_cast<int>(st.int64(4));
  j.max_retries = static_cast<int>(st.int64(5));
  if (auto v = st.optional_int64(6)) j.lease_expires_at = Timestamp{*v};
  j.enqueued_at = Timestamp{st.int64(7)};
  j.last_error = st.optional_text(8);
  return j;
}

std::vector<Job> read_all(store::Statement& st) {
  std::vector<Job> out;
  while (st.step()) out.push_back(read_job(st));
  return out;
}

}  // namespace

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::kReady: return "ready";
    case JobState::kLeased: return "leased";
    case JobState::kDone: return "done";
    case JobState::kDead: return "dead";
  }
  return "ready";
}

JobState job_state_from_string(std::string_view text) {
  if (text == "ready") return JobState::kReady;
  if (text == "leased") return JobState::kLeased;
  if (text == "done") return JobState::kDone;
  if (text == "dead") return JobState::kDead;
  throw Error(ErrorCode::kValidation, "unknown job state: " + std::string(text));
}

Json to_json(const Job& job) {
  Json j = {{"job_id", job.job_id},
            {"dataset_id", job.dataset_id},
            {"worker_kind", job.worker_kind},
            {"state", to_string(job.state)},
            {"attempts", job.attempts},
            {"max_retries", job.max_retries},
            {"enqueued_at", format_timestamp(job.enqueued_at)}};
  if (job.lease_expires_at) j["lease_expires_at"] = format_timestamp(*job.lease_expires_at);
  if (job.last_error) j["last_error"] = *job.last_error;
  return j;
}

JobQueue::JobQueue(store::Database& db, IdGenerator& ids, const Clock& clock,
                   QueueOptions options)
    : db_(db), ids_(ids), clock_(clock), options_(options) {
  db_.execute(kSchema);
}

std::string_view JobQueue::schema() { return kSchema; }

Job JobQueue::enqueue(const std::string& dataset_id, const std::string& worker_kind) {
  return db_.transaction([&] {
    store::Statement live(db_, std::string("SELECT ") + kColumns +
                                   " FROM jobs WHERE dataset_id = ? AND worker_kind = ? AND "
                                   "state IN ('ready', 'leased')");
    live.bind(1, dataset_id).bind(2, worker_kind);
    if (live.step()) return read_job(live);

    Job job;
    job.job_id = ids_.next(EntityKind::kJob);
    job.dataset_id = dataset_id;
    job.worker_kind = worker_kind;
    job.max_retries = options_.max_retries;
    job.enqueued_at = clock_.now();
    store::Statement ins(db_,
                         "INSERT INTO jobs (job_id, dataset_id, worker_kind, state, attempts, "
                         "max_retries, enqueued_at) VALUES (?, ?, ?, 'ready', 0, ?, ?)");
    ins.bind(1, job.job_id)
        .bind(2, dataset_id)
        .bind(3, worker_kind)
        .bind(4, job.max_retries)
        .bind(5, job.enqueued_at.ms);
    ins.exec();
    return job;
  });
}

int JobQueue::reap_locked(const std::optional<std::string>& worker_kind) {
  const auto now = clock_.now().ms;
  std::string filter = "state = 'leased' AND lease_expires_at <= ?";
  if (worker_kind) filter += " AND worker_kind = ?";
  store::Statement dead(db_, "UPDATE jobs SET state = 'dead', lease_expires_at = NULL, "
                             "last_error = 'lease expired' WHERE " +
                                 filter + " AND attempts > max_retries");
  dead.bind(1, now);
  if (worker_kind) dead.bind(2, *worker_kind);
  int moved = dead.exec();
  store::Statement ready(db_, "UPDATE jobs SET state = 'ready', lease_expires_at = NULL, "
                              "last_error = 'lease expired' WHERE " +
                                  filter);
  ready.bind(1, now);
  if (worker_kind) ready.bind(2, *worker_kind);
  moved += ready.exec();
  return moved;
}

int JobQueue::reap_expired() {
  return db_.transaction([&] { return reap_locked(std::nullopt); });
}

std::optional<Job> JobQueue::claim(const std::string& worker_kind, std::int64_t lease_ms) {
  if (lease_ms <= 0) throw Error(ErrorCode::kValidation, "lease must be positive");
  return db_.transaction([&]() -> std::optional<Job> {
    reap_locked(worker_kind);
    store::Statement next(db_, std::string("SELECT ") + kColumns +
                                   " FROM jobs WHERE worker_kind = ? AND state = 'ready' "
                                   "ORDER BY enqueued_at, seq LIMIT 1");
    next.bind(1, worker_kind);
    if (!next.step()) return std::nullopt;
    Job job = read_job(next);
    job.state = JobState::kLeased;
    job.attempts += 1;
    job.lease_expires_at = clock_.now() + lease_ms;
    store::Statement upd(db_,
                         "UPDATE jobs SET state = 'leased', attempts = ?, lease_expires_at = ? "
                         "WHERE job_id = ? AND state = 'ready'");
    upd.bind(1, job.attempts).bind(2, job.lease_expires_at->ms).bind(3, job.job_id);
    if (upd.exec() != 1) throw Error(ErrorCode::kInternal, "claim lost a race it cannot lose");
    return job;
  });
}

JobState JobQueue::ack(const std::string& job_id, int lease_attempts, Outcome outcome,
                       const std::string& reason) {
  return db_.transaction([&] {
    auto job = find(job_id);
    if (!job) throw Error(ErrorCode::kNotFound, "unknown job " + job_id);
    const auto now = clock_.now();
    if (job->state != JobState::kLeased || job->attempts != lease_attempts ||
        !job->lease_expires_at || now >= *job->lease_expires_at) {
      throw Error(ErrorCode::kStaleLease, "lease on " + job_id + " is no longer held");
    }
    JobState next = JobState::kDone;
    if (outcome == Outcome::kFailure) {
      next = job->attempts <= job->max_retries ? JobState::kReady : JobState::kDead;
    }
    store::Statement upd(db_,
                         "UPDATE jobs SET state = ?, lease_expires_at = NULL, last_error = ? "
                         "WHERE job_id = ? AND state = 'leased' AND attempts = ?");
    upd.bind(1, to_string(next));
    if (outcome == Outcome::kFailure) {
      upd.bind(2, reason.empty() ? std::string("failed") : reason);
    } else {
      upd.bind(2, job->last_error);
    }
    upd.bind(3, job_id).bind(4, lease_attempts);
    if (upd.exec() != 1) throw Error(ErrorCode::kStaleLease, "lease changed during ack");
    return next;
  });
}

std::optional<Job> JobQueue::find(const std::string& job_id) const {
  store::Statement st(db_, std::string("SELECT ") + kColumns + " FROM jobs WHERE job_id = ?");
  st.bind(1, job_id);
  if (!st.step()) return std::nullopt;
  return read_job(st);
}

std::vector<Job> JobQueue::list(std::optional<JobState> state,
                                std::optional<std::string> worker_kind,
                                std::size_t limit) const {
  std::string sql = std::string("SELECT ") + kColumns + " FROM jobs WHERE 1 = 1";
  if (state) sql += " AND state = ?";
  if (worker_kind) sql += " AND worker_kind = ?";
  sql += " ORDER BY enqueued_at, seq LIMIT ?";
  store::Statement st(db_, sql);
  int i = 1;
  if (state) st.bind(i++, to_string(*state));
  if (worker_kind) st.bind(i++, *worker_kind);
  st.bind(i, static_cast<std::int64_t>(limit));
  return read_all(st);
}

std::vector<Job> JobQueue::jobs_for_dataset(const std::string& dataset_id) const {
  store::Statement st(db_, std::string("SELECT ") + kColumns +
                               " FROM jobs WHERE dataset_id = ? ORDER BY seq");
  st.bind(1, dataset_id);
  return read_all(st);
}

QueueCounts JobQueue::counts(std::optional<std::string> worker_kind) const {
  std::string sql = "SELECT state, COUNT(*) FROM jobs";
  if (worker_kind) sql += " WHERE worker_kind = ?";
  sql += " GROUP BY state";
  store::Statement st(db_, sql);
  if (worker_kind) st.bind(1, *worker_kind);
  QueueCounts c;
  while (st.step()) {
    const auto n = st.int64(1);
    switch (job_state_from_string(st.text(0))) {
      case JobState::kReady: c.ready = n; break;
      case JobState::kLeased: c.leased = n; break;
      case JobState::kDone: c.done = n; break;
      case JobState::kDead: c.dead = n; break;
    }
  }
  return c;
}

}  // namespace hg::queue
