#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hg/common/clock.hpp"
#include "hg/common/ids.hpp"
#include "hg/ctm/cohort_filter.hpp"
#include "hg/ctm/ingest.hpp"
#include "hg/queue/job_queue.hpp"
#include "hg/store/database.hpp"
#include "hg/store/datastore.hpp"
#include "hg/store/object_store.hpp"

namespace hg::ctm {

struct ServiceOptions {
  queue::QueueOptions queue;
  // When set, creating studies and driving the admin clock require it.
  std::optional<std::string> admin_token;
  // Automatic rule evaluation looks back this many days.
  int rule_lookback_days = 7;
  // A rule day is evaluated at the latest this long after the day closes,
  // even when some of its datasets are still unprocessed.
  std::int64_t rule_grace_ms = kMsPerDay;
};

struct StudyCreated {
  Study study;
  std::string researcher_token;
};

struct Enrollment {
  std::string raw_id;
  Attributes attributes;
  std::optional<std::string> device_id;
};

struct SubjectCreated {
  Subject subject;
  std::optional<std::string> device_token;  // minted once, when a device is bound
  bool created = false;
};

struct TestDraft {
  TestKind kind = TestKind::kPhq8;
  Json params = Json::object();
};

struct TaskCreated {
  Task task;
  std::vector<TaskOccurrence> occurrences;
};

struct RuleDraft {
  std::string name;
  RuleTrigger trigger;
  RulePredicate predicate;
  RuleAction action;
  bool active = true;
};

struct RuleRunOutcome {
  std::string rule_id;
  Date day;
  std::optional<Cohort> cohort;
  std::optional<Task> task;
  std::size_t candidates = 0;  // source-cohort subjects with a usable metric
  bool already_ran = false;
  std::vector<std::string> errors;  // results skipped during evaluation
};

// What a device receives for one due occurrence: everything needed to run
// the tests without another request.
struct PendingTask {
  TaskOccurrence occurrence;
  TestSet testset;
};

struct ResultSubmission {
  std::string dataset_id;
  std::string datapoint_id;
  std::string worker_kind;
  Json body = Json::object();
};

// Job plus the dataset it refers to, as handed to workers.
struct DatasetDescriptor {
  Dataset dataset;
  Test test;
  std::vector<Datapoint> datapoints;
};

struct ClaimedJob {
  queue::Job job;
  DatasetDescriptor dataset;
};

struct TickReport {
  Timestamp now;
  int materialized = 0;
  int expired = 0;
  int published = 0;
  int rule_runs = 0;
  int tasks_created = 0;
};

Json to_json(const StudyCreated& v);
Json to_json(const SubjectCreated& v);
Json to_json(const TaskCreated& v);
Json to_json(const RuleRunOutcome& v);
Json to_json(const PendingTask& v);
Json to_json(const DatasetDescriptor& v);
Json to_json(const ClaimedJob& v);
Json to_json(const TickReport& v);

Enrollment parse_enrollment(const Json& j);
TestDraft parse_test_draft(const Json& j);
RuleDraft parse_rule_draft(const Json& j);
ResultSubmission parse_result_submission(const Json& j);
DatasetDescriptor parse_dataset_descriptor(const Json& j);
ClaimedJob parse_claimed_job(const Json& j);

// Bearer tokens are stored as the hex SHA-256 of the token.
std::string token_hash(const std::string& token);

// The Clinical Task Manager. Every public operation takes the caller's
// credential and enforces study scoping before touching data.
class CtmService {
 public:
  CtmService(store::Database& db, store::ObjectStore& objects, IdGenerator& ids,
             const Clock& clock, ServiceOptions options = {});

  // Authentication. Throws UNAUTHORIZED for unknown tokens.
  Credential authenticate(const std::string& token) const;
  std::string mint_token(const Credential& credential);
  // Registers a caller-chosen worker token (idempotent).
  void register_worker_token(const std::string& token);
  bool is_admin(const std::string& token) const;
  bool admin_required() const { return options_.admin_token.has_value(); }

  // Studies and subjects.
  StudyCreated create_study(const std::string& name);
  Study get_study(const Credential& who, const std::string& study_id) const;
  std::vector<Study> list_studies(const Credential& who) const;
  SubjectCreated enroll_subject(const Credential& who, const std::string& study_id,
                                const Enrollment& enrollment);
  std::vector<Subject> list_subjects(const Credential& who, const std::string& study_id) const;
  // Mints a fresh device token for a subject with a bound device.
  std::string issue_device_token(const Credential& who, const std::string& study_id,
                                 const std::string& subject_id);

  // Cohorts, test-sets, tasks.
  Cohort define_cohort(const Credential& who, const std::string& study_id,
                       const std::string& name, const CohortSelector& selector);
  std::vector<Cohort> list_cohorts(const Credential& who, const std::string& study_id) const;
  TestSet create_testset(const Credential& who, const std::string& study_id,
                         const std::string& name, const std::vector<TestDraft>& tests);
  std::vector<TestSet> list_testsets(const Credential& who, const std::string& study_id) const;
  TaskCreated create_task(const Credential& who, const std::string& study_id,
                          const std::string& testset_id, const std::string& cohort_id,
                          const Schedule& schedule);
  std::vector<Task> list_tasks(const Credential& who, const std::string& study_id) const;
  std::vector<TaskOccurrence> list_occurrences(const Credential& who,
                                               const std::string& study_id) const;

  // Rules.
  Rule create_rule(const Credential& who, const std::string& study_id, const RuleDraft& draft);
  std::vector<Rule> list_rules(const Credential& who, const std::string& study_id) const;
  // Evaluates the rule over one UTC day (default: today). Idempotent per
  // (rule, day).
  RuleRunOutcome evaluate_rule(const Credential& who, const std::string& study_id,
                               const std::string& rule_id, std::optional<Date> day);

  // Device side. authorize_device throws FORBIDDEN unless the credential
  // is bound to the device.
  void authorize_device(const Credential& who, const std::string& device_id) const;
  std::vector<PendingTask> poll_tasks(const Credential& who, const std::string& device_id,
                                      std::optional<Timestamp> now);
  IngestOutcome upload(const Credential& who, const std::string& device_id,
                       const UploadEnvelope& envelope);

  // Worker side.
  AnalyticResult submit_result(const Credential& who, const ResultSubmission& submission);
  std::optional<ClaimedJob> claim(const Credential& who, const std::string& worker_kind,
                                  std::int64_t lease_ms);
  queue::JobState ack(const Credential& who, const std::string& job_id, int lease_attempts,
                      queue::Outcome outcome, const std::string& reason);
  std::vector<std::uint8_t> get_object(const Credential& who, const std::string& sha256) const;
  DatasetDescriptor describe_dataset(const Credential& who, const std::string& dataset_id) const;
  bool flush_dataset(const Credential& who, const std::string& dataset_id);

  // Results gateway: researchers see their study; devices see their own
  // subject only.
  std::vector<AnalyticResult> fetch_results(const Credential& who, store::ResultQuery query) const;

  // Export and monitoring.
  std::vector<Datapoint> list_datapoints(const Credential& who,
                                         const std::string& study_id) const;
  std::vector<Dataset> list_datasets(const Credential& who, const std::string& study_id) const;
  std::vector<store::VaultEntry> export_vault(const Credential& who,
                                              const std::string& study_id) const;
  Json study_board(const Credential& who, const std::string& study_id) const;
  std::vector<queue::Job> list_jobs(const Credential& who, std::optional<queue::JobState> state,
                                    std::optional<std::string> worker_kind) const;
  queue::QueueCounts queue_counts(const Credential& who) const;

  // Scheduler: materialize today's daily occurrences, expire overdue ones,
  // publish settled datasets and run due rules. Serialized internally.
  TickReport tick(std::optional<Timestamp> now = std::nullopt);

  store::Datastore& datastore() { return store_; }
  queue::JobQueue& job_queue() { return queue_; }
  Ingestor& ingestor() { return ingestor_; }
  const Clock& clock() const { return clock_; }

 private:
  void require_researcher(const Credential& who, const std::string& study_id) const;
  void require_worker(const Credential& who) const;
  void require_owned(const std::string& study_id, EntityKind kind, const std::string& id) const;
  Subject device_subject(const Credential& who, const std::string& device_id) const;

  std::vector<TaskOccurrence> materialize(const Task& task, Date day);
  RuleRunOutcome run_rule(const Rule& rule, Date day, bool automatic);
  bool rule_day_ready(const Rule& rule, Date day, Timestamp now) const;

  store::Database& db_;
  store::Datastore store_;
  store::ObjectStore& objects_;
  IdGenerator& ids_;
  const Clock& clock_;
  ServiceOptions options_;
  queue::JobQueue queue_;
  Ingestor ingestor_;
  std::mutex tick_mu_;
};

}  // namespace hg::ctm
