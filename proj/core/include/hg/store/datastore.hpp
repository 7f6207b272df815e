#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hg/domain/entities.hpp"
#include "hg/domain/validate.hpp"
#include "hg/store/database.hpp"

namespace hg::store {

struct ResultQuery {
  std::string study_id;
  std::optional<std::string> subject_id;
  std::optional<std::string> worker_kind;
  std::optional<std::string> test_id;
  std::optional<Timestamp> from;  // inclusive, on collected_at
  std::optional<Timestamp> to;    // exclusive, on collected_at
};

struct RuleRun {
  std::string rule_id;
  Date day;
  std::optional<std::string> cohort_id;
  std::optional<std::string> task_id;
  bool automatic = false;
  Timestamp evaluated_at;
};

struct VaultEntry {
  std::string raw_id;
  std::string pseudonym;
  std::string study_id;
};

struct OccurrenceTally {
  std::int64_t pending = 0;
  std::int64_t delivered = 0;
  std::int64_t completed = 0;
  std::int64_t expired = 0;

  std::int64_t total() const { return pending + delivered + completed + expired; }
};

// Relational persistence for every CTM entity. Tables mirror the domain
// types one to one; see schema() for the layout. All methods are safe to
// call concurrently; compose several in Database::transaction() for
// atomicity.
class Datastore final : public StudyLookup {
 public:
  explicit Datastore(Database& db);

  Database& db() { return db_; }
  static std::string_view schema();

  // Studies and tenancy.
  void insert_study(const Study& study, const std::vector<std::uint8_t>& salt);
  std::optional<Study> find_study(const std::string& study_id) const;
  std::optional<Study> find_study_by_name(const std::string& name) const;
  std::vector<Study> list_studies() const;
  std::vector<std::uint8_t> study_salt(const std::string& study_id) const;

  void insert_credential(const std::string& token_hash, const Credential& credential);
  std::optional<Credential> find_credential(const std::string& token_hash) const;

  // Subjects.
  void insert_subject(const Subject& subject);
  std::optional<Subject> find_subject(const std::string& subject_id) const;
  std::optional<Subject> find_subject_by_device(const std::string& device_id) const;
  std::vector<Subject> list_subjects(const std::string& study_id) const;

  // Cohorts.
  void insert_cohort(const Cohort& cohort);
  std::optional<Cohort> find_cohort(const std::string& cohort_id) const;
  std::optional<Cohort> find_cohort_by_name(const std::string& study_id,
                                            const std::string& name) const;
  std::vector<Cohort> list_cohorts(const std::string& study_id) const;

  // Test-sets and their tests.
  void insert_testset(const TestSet& testset);
  std::optional<TestSet> find_testset(const std::string& testset_id) const;
  std::optional<TestSet> find_testset_by_name(const std::string& study_id,
                                              const std::string& name) const;
  std::optional<TestSet> find_testset_of_test(const std::string& test_id) const;
  std::vector<TestSet> list_testsets(const std::string& study_id) const;

  // Tasks.
  void insert_task(const Task& task);
  std::optional<Task> find_task(const std::string& task_id) const;
  std::vector<Task> list_tasks(const std::string& study_id) const;
  std::vector<Task> list_all_tasks() const;

  // Occurrences. insert returns false when (task, subject, slot) exists.
  bool insert_occurrence(const TaskOccurrence& occurrence);
  std::optional<TaskOccurrence> find_occurrence(const std::string& occurrence_id) const;
  std::vector<TaskOccurrence> list_open_occurrences_for_subject(const std::string& subject_id,
                                                                Timestamp now) const;
  std::vector<TaskOccurrence> list_expirable(Timestamp now) const;
  std::vector<TaskOccurrence> list_occurrences_for_task(const std::string& task_id) const;
  std::vector<TaskOccurrence> list_occurrences_for_study(const std::string& study_id) const;
  // Occurrences of tasks on `cohort_id` whose window starts within day.
  std::vector<TaskOccurrence> list_occurrences_for_cohort_day(const std::string& cohort_id,
                                                              Date day) const;
  // Occurrences of tasks on `testset_id` whose window starts within day.
  std::vector<TaskOccurrence> list_occurrences_for_testset_day(const std::string& testset_id,
                                                               Date day) const;
  // Sets the status iff the current status is one of `from`.
  bool compare_and_set_status(const std::string& occurrence_id,
                              std::initializer_list<OccurrenceStatus> from,
                              OccurrenceStatus to);
  OccurrenceTally tally_for_task(const std::string& task_id) const;
  OccurrenceTally tally_for_study(const std::string& study_id) const;

  // Datapoints.
  void insert_datapoint(const Datapoint& datapoint);
  std::optional<Datapoint> find_datapoint(const std::string& datapoint_id) const;
  std::optional<Datapoint> find_datapoint_by_key(const std::string& occurrence_id,
                                                 const std::string& test_id,
                                                 const std::string& idempotency_key) const;
  std::set<std::string> tests_with_datapoints(const std::string& occurrence_id) const;
  std::vector<Datapoint> list_datapoints(const std::string& study_id) const;
  std::vector<Datapoint> list_dataset_datapoints(const std::string& dataset_id) const;
  std::int64_t count_datapoints(const std::string& study_id) const;
  std::optional<std::string> dataset_of(const std::string& datapoint_id) const;

  // Datasets: one per (study, test, UTC day, seq).
  void insert_dataset(const Dataset& dataset);
  std::optional<Dataset> find_dataset(const std::string& dataset_id) const;
  std::optional<Dataset> find_latest_dataset(const std::string& study_id,
                                             const std::string& test_id, Date day) const;
  void attach_to_dataset(const std::string& datapoint_id, const std::string& dataset_id);
  std::vector<Dataset> list_datasets(const std::string& study_id) const;
  std::vector<Dataset> list_open_datasets() const;
  bool compare_and_set_dataset_status(const std::string& dataset_id, DatasetStatus from,
                                      DatasetStatus to);

  // Results: at most one row per (datapoint, worker_kind). Returns the stored
  // row; an existing row keeps its result_id and takes the new body.
  AnalyticResult upsert_result(const AnalyticResult& result);
  std::optional<AnalyticResult> find_result(const std::string& datapoint_id,
                                            const std::string& worker_kind) const;
  std::vector<AnalyticResult> query_results(const ResultQuery& query) const;
  std::int64_t count_results(const std::string& study_id) const;

  // Rules.
  void insert_rule(const Rule& rule);
  std::optional<Rule> find_rule(const std::string& rule_id) const;
  std::optional<Rule> find_rule_by_name(const std::string& study_id,
                                        const std::string& name) const;
  std::vector<Rule> list_rules(const std::string& study_id) const;
  std::vector<Rule> list_active_rules() const;
  std::optional<RuleRun> find_rule_run(const std::string& rule_id, Date day) const;
  std::vector<RuleRun> list_rule_runs(const std::string& rule_id) const;
  void upsert_rule_run(const RuleRun& run);

  // Pseudonym vault.
  // Returns the stored pseudonym (existing one wins on conflict).
  std::string insert_pseudonym(const std::string& study_id, const std::string& raw_id,
                               const std::string& pseudonym);
  std::optional<std::string> find_pseudonym(const std::string& study_id,
                                            const std::string& raw_id) const;
  std::vector<VaultEntry> export_vault(const std::string& study_id) const;

  // StudyLookup
  std::optional<std::string> study_of(EntityKind kind, const std::string& id) const override;

 private:
  Database& db_;
};

}  // namespace hg::store
