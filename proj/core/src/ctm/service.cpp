#include "hg/ctm/service.hpp"

#include <algorithm>
#include <map>

#include <openssl/crypto.h>
#include <spdlog/spdlog.h>

#include "hg/common/crypto.hpp"
#include "hg/common/error.hpp"
#include "hg/dataprep/dataprep.hpp"
#include "hg/domain/serialize.hpp"
#include "hg/domain/validate.hpp"

namespace hg::ctm {
namespace {

[[noreturn]] void forbidden(const std::string& why) { throw Error(ErrorCode::kForbidden, why); }

bool is_hex_digest(const std::string& s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

bool open_status(OccurrenceStatus s) {
  return s == OccurrenceStatus::kPending || s == OccurrenceStatus::kDelivered;
}

bool testset_has_kind(const TestSet& ts, std::string_view worker_kind) {
  return std::any_of(ts.tests.begin(), ts.tests.end(),
                     [&](const Test& t) { return worker_kind_for(t.kind) == worker_kind; });
}

queue::Job job_from_json(const Json& j) {
  queue::Job job;
  job.job_id = require_string(j, "job_id");
  job.dataset_id = require_string(j, "dataset_id");
  job.worker_kind = require_string(j, "worker_kind");
  job.state = queue::job_state_from_string(require_string(j, "state"));
  job.attempts = static_cast<int>(require_number(j, "attempts"));
  job.max_retries = static_cast<int>(require_number(j, "max_retries"));
  if (j.contains("lease_expires_at")) {
    job.lease_expires_at = parse_timestamp(require_string(j, "lease_expires_at"));
  }
  job.enqueued_at = parse_timestamp(require_string(j, "enqueued_at"));
  if (j.contains("last_error")) job.last_error = require_string(j, "last_error");
  return job;
}

}  // namespace

std::string token_hash(const std::string& token) {
  return crypto::to_hex(crypto::sha256(std::string_view(token)));
}

Json to_json(const StudyCreated& v) {
  return Json{{"study", v.study}, {"researcher_token", v.researcher_token}};
}

Json to_json(const SubjectCreated& v) {
  Json j{{"subject", v.subject}, {"created", v.created}};
  if (v.device_token) j["device_token"] = *v.device_token;
  return j;
}

Json to_json(const TaskCreated& v) {
  return Json{{"task", v.task}, {"occurrences", v.occurrences}};
}

Json to_json(const RuleRunOutcome& v) {
  Json j{{"rule_id", v.rule_id},
         {"day", format_date(v.day)},
         {"candidates", v.candidates},
         {"already_ran", v.already_ran},
         {"errors", v.errors},
         {"cohort", nullptr},
         {"task", nullptr}};
  if (v.cohort) j["cohort"] = *v.cohort;
  if (v.task) j["task"] = *v.task;
  return j;
}

Json to_json(const PendingTask& v) {
  Json tests = Json::array();
  for (const auto& t : v.testset.tests) {
    tests.push_back({{"test_id", t.test_id},
                     {"kind", to_string(t.kind)},
                     {"params", t.params},
                     {"payload_schema", payload_schema_for(t.kind)},
                     {"payload_kind", t.kind == TestKind::kPhq8 ? "text" : "file"}});
  }
  const auto& o = v.occurrence;
  return Json{{"occurrence_id", o.occurrence_id},
              {"task_id", o.task_id},
              {"study_id", o.study_id},
              {"subject_id", o.subject_id},
              {"slot", o.slot},
              {"due_start", format_timestamp(o.due_start)},
              {"due_end", format_timestamp(o.due_end)},
              {"status", to_string(o.status)},
              {"testset_id", v.testset.testset_id},
              {"testset_name", v.testset.name},
              {"tests", std::move(tests)}};
}

Json to_json(const DatasetDescriptor& v) {
  return Json{{"dataset", v.dataset}, {"test", v.test}, {"datapoints", v.datapoints}};
}

Json to_json(const ClaimedJob& v) {
  return Json{{"job", queue::to_json(v.job)}, {"dataset", to_json(v.dataset)}};
}

Json to_json(const TickReport& v) {
  return Json{{"now", format_timestamp(v.now)},
              {"materialized", v.materialized},
              {"expired", v.expired},
              {"published", v.published},
              {"rule_runs", v.rule_runs},
              {"tasks_created", v.tasks_created}};
}

Enrollment parse_enrollment(const Json& j) {
  Enrollment e;
  e.raw_id = require_string(j, "raw_id");
  if (j.contains("attributes")) {
    const Json& attrs = j["attributes"];
    if (!attrs.is_object()) throw Error(ErrorCode::kValidation, "attributes must be an object");
    for (const auto& [k, v] : attrs.items()) e.attributes[k] = attribute_from_json(v);
  }
  if (j.contains("device_id") && !j["device_id"].is_null()) {
    e.device_id = require_string(j, "device_id");
  }
  return e;
}

TestDraft parse_test_draft(const Json& j) {
  TestDraft d;
  auto kind = test_kind_from_string(require_string(j, "kind"));
  if (!kind) {
    throw Error(ErrorCode::kValidation,
                "kind: unknown test kind '" + j["kind"].get<std::string>() + "'");
  }
  d.kind = *kind;
  if (j.contains("params") && !j["params"].is_null()) d.params = j["params"];
  return d;
}

RuleDraft parse_rule_draft(const Json& j) {
  RuleDraft d;
  d.name = j.value("name", std::string());
  d.trigger = require_field(j, "trigger").get<RuleTrigger>();
  d.predicate = require_field(j, "predicate").get<RulePredicate>();
  d.action = require_field(j, "action").get<RuleAction>();
  d.active = j.value("active", true);
  return d;
}

ResultSubmission parse_result_submission(const Json& j) {
  ResultSubmission s;
  s.dataset_id = require_string(j, "dataset_id");
  s.datapoint_id = require_string(j, "datapoint_id");
  s.worker_kind = require_string(j, "worker_kind");
  s.body = require_field(j, "body");
  return s;
}

DatasetDescriptor parse_dataset_descriptor(const Json& j) {
  DatasetDescriptor d;
  d.dataset = require_field(j, "dataset").get<Dataset>();
  d.test = require_field(j, "test").get<Test>();
  for (const auto& dp : require_field(j, "datapoints")) d.datapoints.push_back(dp.get<Datapoint>());
  return d;
}

ClaimedJob parse_claimed_job(const Json& j) {
  return ClaimedJob{job_from_json(require_field(j, "job")),
                    parse_dataset_descriptor(require_field(j, "dataset"))};
}

CtmService::CtmService(store::Database& db, store::ObjectStore& objects, IdGenerator& ids,
                       const Clock& clock, ServiceOptions options)
    : db_(db),
      store_(db),
      objects_(objects),
      ids_(ids),
      clock_(clock),
      options_(std::move(options)),
      queue_(db, ids, clock, options_.queue),
      ingestor_(store_, objects, queue_, ids, clock) {}

Credential CtmService::authenticate(const std::string& token) const {
  if (token.empty()) throw Error(ErrorCode::kUnauthorized, "missing bearer token");
  auto cred = store_.find_credential(token_hash(token));
  if (!cred) throw Error(ErrorCode::kUnauthorized, "unknown bearer token");
  return *cred;
}

std::string CtmService::mint_token(const Credential& credential) {
  std::string token = ids_.token();
  store_.insert_credential(token_hash(token), credential);
  return token;
}

void CtmService::register_worker_token(const std::string& token) {
  if (token.empty()) throw Error(ErrorCode::kValidation, "worker token is empty");
  db_.transaction([&] {
    if (store_.find_credential(token_hash(token))) return;
    store_.insert_credential(token_hash(token), Credential{"", Role::kWorker, std::nullopt});
  });
}

bool CtmService::is_admin(const std::string& token) const {
  if (!options_.admin_token) return true;
  const auto& want = *options_.admin_token;
  return token.size() == want.size() &&
         CRYPTO_memcmp(token.data(), want.data(), want.size()) == 0;
}

void CtmService::require_researcher(const Credential& who, const std::string& study_id) const {
  if (who.role != Role::kResearcher) forbidden("researcher credential required");
  if (who.study_id != study_id) forbidden("credential is scoped to another study");
  if (!store_.find_study(study_id)) throw Error(ErrorCode::kNotFound, "unknown study " + study_id);
}

void CtmService::require_worker(const Credential& who) const {
  if (who.role != Role::kWorker) forbidden("worker credential required");
}

void CtmService::require_owned(const std::string& study_id, EntityKind kind,
                               const std::string& id) const {
  auto owner = store_.study_of(kind, id);
  if (!owner) throw Error(ErrorCode::kNotFound, "unknown " + std::string(id_prefix(kind)) + " " + id);
  if (*owner != study_id) forbidden(id + " belongs to another study");
}

Subject CtmService::device_subject(const Credential& who, const std::string& device_id) const {
  auto subject = store_.find_subject_by_device(device_id);
  if (!subject) throw Error(ErrorCode::kNotFound, "unknown device " + device_id);
  if (who.role != Role::kDevice || who.study_id != subject->study_id ||
      who.subject_id != subject->subject_id) {
    forbidden("credential is not bound to device " + device_id);
  }
  return *subject;
}

StudyCreated CtmService::create_study(const std::string& name) {
  Study study{ids_.next(EntityKind::kStudy), name, clock_.now()};
  throw_if_invalid(validate(study), "study");
  std::vector<std::uint8_t> salt(32);
  ids_.source().fill(salt);
  return db_.transaction([&] {
    if (store_.find_study_by_name(name)) {
      throw Error(ErrorCode::kConflict, "a study named '" + name + "' already exists");
    }
    store_.insert_study(study, salt);
    std::string token = mint_token(Credential{study.study_id, Role::kResearcher, std::nullopt});
    return StudyCreated{study, token};
  });
}

Study CtmService::get_study(const Credential& who, const std::string& study_id) const {
  require_researcher(who, study_id);
  return *store_.find_study(study_id);
}

std::vector<Study> CtmService::list_studies(const Credential& who) const {
  if (who.role == Role::kWorker) return store_.list_studies();
  if (who.role != Role::kResearcher) forbidden("researcher credential required");
  auto study = store_.find_study(who.study_id);
  return study ? std::vector<Study>{*study} : std::vector<Study>{};
}

SubjectCreated CtmService::enroll_subject(const Credential& who, const std::string& study_id,
                                          const Enrollment& e) {
  require_researcher(who, study_id);
  if (e.raw_id.empty()) throw Error(ErrorCode::kValidation, "raw_id is empty");
  if (e.device_id && e.device_id->empty()) {
    throw Error(ErrorCode::kValidation, "device_id is empty");
  }
  return db_.transaction([&] {
    const std::string id = dataprep::pseudonymize(store_, study_id, e.raw_id);
    if (auto existing = store_.find_subject(id)) return SubjectCreated{*existing, std::nullopt, false};
    if (e.device_id && store_.find_subject_by_device(*e.device_id)) {
      throw Error(ErrorCode::kConflict, "device " + *e.device_id + " is already bound");
    }
    Subject s{id, study_id, e.attributes, e.device_id};
    throw_if_invalid(validate(s), "subject");
    store_.insert_subject(s);
    SubjectCreated out{s, std::nullopt, true};
    if (e.device_id) out.device_token = mint_token(Credential{study_id, Role::kDevice, id});
    return out;
  });
}

std::vector<Subject> CtmService::list_subjects(const Credential& who,
                                               const std::string& study_id) const {
  require_researcher(who, study_id);
  return store_.list_subjects(study_id);
}

std::string CtmService::issue_device_token(const Credential& who, const std::string& study_id,
                                           const std::string& subject_id) {
  require_researcher(who, study_id);
  require_owned(study_id, EntityKind::kSubject, subject_id);
  auto subject = store_.find_subject(subject_id);
  if (!subject->device_id) {
    throw Error(ErrorCode::kValidation, "subject " + subject_id + " has no device");
  }
  return mint_token(Credential{study_id, Role::kDevice, subject_id});
}

Cohort CtmService::define_cohort(const Credential& who, const std::string& study_id,
                                 const std::string& name, const CohortSelector& selector) {
  require_researcher(who, study_id);
  Cohort cohort;
  cohort.cohort_id = ids_.next(EntityKind::kCohort);
  cohort.study_id = study_id;
  cohort.name = name;
  cohort.created_at = clock_.now();
  return db_.transaction([&] {
    if (selector.is_filter) {
      cohort.member_ids = select_members(store_.list_subjects(study_id), selector.filter);
    } else {
      for (const auto& id : selector.members) require_owned(study_id, EntityKind::kSubject, id);
      cohort.member_ids = selector.members;
    }
    throw_if_invalid(validate(cohort, store_), "cohort");
    if (store_.find_cohort_by_name(study_id, name)) {
      throw Error(ErrorCode::kConflict, "a cohort named '" + name + "' already exists");
    }
    store_.insert_cohort(cohort);
    return cohort;
  });
}

std::vector<Cohort> CtmService::list_cohorts(const Credential& who,
                                             const std::string& study_id) const {
  require_researcher(who, study_id);
  return store_.list_cohorts(study_id);
}

TestSet CtmService::create_testset(const Credential& who, const std::string& study_id,
                                   const std::string& name, const std::vector<TestDraft>& tests) {
  require_researcher(who, study_id);
  TestSet ts;
  ts.testset_id = ids_.next(EntityKind::kTestSet);
  ts.study_id = study_id;
  ts.name = name;
  for (const auto& draft : tests) {
    ts.tests.push_back(
        Test{ids_.next(EntityKind::kTest), draft.kind, normalized_test_params(draft.kind, draft.params)});
  }
  throw_if_invalid(validate(ts), "test-set");
  return db_.transaction([&] {
    if (store_.find_testset_by_name(study_id, name)) {
      throw Error(ErrorCode::kConflict, "a test-set named '" + name + "' already exists");
    }
    store_.insert_testset(ts);
    return ts;
  });
}

std::vector<TestSet> CtmService::list_testsets(const Credential& who,
                                               const std::string& study_id) const {
  require_researcher(who, study_id);
  return store_.list_testsets(study_id);
}

std::vector<TaskOccurrence> CtmService::materialize(const Task& task, Date day) {
  auto cohort = store_.find_cohort(task.cohort_id);
  if (!cohort) throw Error(ErrorCode::kInternal, "task " + task.task_id + " lost its cohort");
  const std::string slot =
      task.schedule.mode == ScheduleMode::kOnce ? std::string("once") : format_date(day);
  std::vector<TaskOccurrence> created;
  for (const auto& subject_id : cohort->member_ids) {
    TaskOccurrence o;
    o.occurrence_id = ids_.next(EntityKind::kOccurrence);
    o.task_id = task.task_id;
    o.study_id = task.study_id;
    o.subject_id = subject_id;
    o.slot = slot;
    o.due_start = at(day, task.schedule.window_start);
    o.due_end = at(day, task.schedule.window_end);
    if (store_.insert_occurrence(o)) created.push_back(std::move(o));
  }
  return created;
}

namespace {

bool daily_active(const Task& task, Date day) {
  if (task.schedule.mode != ScheduleMode::kDaily) return false;
  const Date first = task.schedule.start_date.value_or(date_of(task.created_at));
  if (day < first) return false;
  return !task.schedule.end_date || day <= *task.schedule.end_date;
}

}  // namespace

TaskCreated CtmService::create_task(const Credential& who, const std::string& study_id,
                                    const std::string& testset_id, const std::string& cohort_id,
                                    const Schedule& schedule) {
  require_researcher(who, study_id);
  require_owned(study_id, EntityKind::kTestSet, testset_id);
  require_owned(study_id, EntityKind::kCohort, cohort_id);
  Task task;
  task.task_id = ids_.next(EntityKind::kTask);
  task.study_id = study_id;
  task.testset_id = testset_id;
  task.cohort_id = cohort_id;
  task.schedule = schedule;
  task.created_at = clock_.now();
  throw_if_invalid(validate(task, store_), "task");
  return db_.transaction([&] {
    store_.insert_task(task);
    TaskCreated out{task, {}};
    const Date today = date_of(task.created_at);
    if (schedule.mode == ScheduleMode::kOnce) {
      out.occurrences = materialize(task, schedule.start_date.value_or(today));
    } else if (daily_active(task, today)) {
      out.occurrences = materialize(task, today);
    }
    return out;
  });
}

std::vector<Task> CtmService::list_tasks(const Credential& who, const std::string& study_id) const {
  require_researcher(who, study_id);
  return store_.list_tasks(study_id);
}

std::vector<TaskOccurrence> CtmService::list_occurrences(const Credential& who,
                                                         const std::string& study_id) const {
  require_researcher(who, study_id);
  return store_.list_occurrences_for_study(study_id);
}

Rule CtmService::create_rule(const Credential& who, const std::string& study_id,
                             const RuleDraft& draft) {
  require_researcher(who, study_id);
  require_owned(study_id, EntityKind::kTestSet, draft.action.target_testset_id);
  require_owned(study_id, EntityKind::kCohort, draft.action.source_cohort_id);
  Rule rule;
  rule.rule_id = ids_.next(EntityKind::kRule);
  rule.study_id = study_id;
  rule.name = draft.name.empty() ? rule.rule_id : draft.name;
  rule.trigger = draft.trigger;
  rule.predicate = draft.predicate;
  rule.action = draft.action;
  rule.active = draft.active;
  rule.created_at = clock_.now();
  throw_if_invalid(validate(rule, store_), "rule");
  return db_.transaction([&] {
    if (store_.find_rule_by_name(study_id, rule.name)) {
      throw Error(ErrorCode::kConflict, "a rule named '" + rule.name + "' already exists");
    }
    store_.insert_rule(rule);
    return rule;
  });
}

std::vector<Rule> CtmService::list_rules(const Credential& who, const std::string& study_id) const {
  require_researcher(who, study_id);
  return store_.list_rules(study_id);
}

RuleRunOutcome CtmService::run_rule(const Rule& rule, Date day, bool automatic) {
  return db_.transaction([&] {
    RuleRunOutcome out;
    out.rule_id = rule.rule_id;
    out.day = day;
    if (auto run = store_.find_rule_run(rule.rule_id, day)) {
      out.already_ran = true;
      if (run->cohort_id) out.cohort = store_.find_cohort(*run->cohort_id);
      if (run->task_id) out.task = store_.find_task(*run->task_id);
      return out;
    }
    auto source = store_.find_cohort(rule.action.source_cohort_id);
    if (!source) throw Error(ErrorCode::kInternal, "rule source cohort vanished");

    store::ResultQuery q;
    q.study_id = rule.study_id;
    q.worker_kind = rule.trigger.worker_kind;
    q.from = day.start();
    q.to = day.next().start();
    std::map<std::string, AnalyticResult> latest;
    for (auto& r : store_.query_results(q)) {
      if (!source->member_ids.contains(r.subject_id)) continue;
      auto it = latest.find(r.subject_id);
      if (it == latest.end() || it->second.collected_at <= r.collected_at) {
        latest[r.subject_id] = std::move(r);
      }
    }

    std::set<std::string> members;
    for (const auto& [subject_id, result] : latest) {
      auto it = result.body.find(rule.predicate.metric);
      if (it == result.body.end() || !it->is_number()) {
        out.errors.push_back(result.result_id + ": metric '" + rule.predicate.metric +
                             "' missing from result body");
        spdlog::warn("rule {}: {}", rule.rule_id, out.errors.back());
        continue;
      }
      ++out.candidates;
      if (rule.predicate.matches(it->get<double>())) members.insert(subject_id);
    }

    store::RuleRun run{rule.rule_id, day, std::nullopt, std::nullopt, automatic, clock_.now()};
    if (!members.empty()) {
      Cohort cohort;
      cohort.cohort_id = ids_.next(EntityKind::kCohort);
      cohort.study_id = rule.study_id;
      cohort.name = rule.action.sub_cohort_name + "-" + format_date(day);
      if (store_.find_cohort_by_name(rule.study_id, cohort.name)) {
        cohort.name += "-" + rule.rule_id;
      }
      cohort.member_ids = members;
      cohort.origin = CohortOrigin::kRuleDerived;
      cohort.rule_id = rule.rule_id;
      cohort.created_at = clock_.now();
      throw_if_invalid(validate(cohort, store_), "rule-derived cohort");
      store_.insert_cohort(cohort);

      Task task;
      task.task_id = ids_.next(EntityKind::kTask);
      task.study_id = rule.study_id;
      task.testset_id = rule.action.target_testset_id;
      task.cohort_id = cohort.cohort_id;
      task.schedule.mode = ScheduleMode::kOnce;
      task.schedule.window_start = rule.action.window_start;
      task.schedule.window_end = rule.action.window_end;
      task.schedule.start_date = Date{day.days + rule.action.day_offset};
      task.created_by_rule = rule.rule_id;
      task.created_at = clock_.now();
      throw_if_invalid(validate(task, store_), "rule-derived task");
      store_.insert_task(task);
      materialize(task, *task.schedule.start_date);

      run.cohort_id = cohort.cohort_id;
      run.task_id = task.task_id;
      out.cohort = cohort;
      out.task = task;
    }
    store_.upsert_rule_run(run);
    return out;
  });
}

RuleRunOutcome CtmService::evaluate_rule(const Credential& who, const std::string& study_id,
                                         const std::string& rule_id, std::optional<Date> day) {
  require_researcher(who, study_id);
  require_owned(study_id, EntityKind::kRule, rule_id);
  auto rule = store_.find_rule(rule_id);
  if (!rule->active) throw Error(ErrorCode::kValidation, "rule " + rule_id + " is inactive");
  return run_rule(*rule, day.value_or(date_of(clock_.now())), false);
}

bool CtmService::rule_day_ready(const Rule& rule, Date day, Timestamp now) const {
  if (rule.trigger.type == TriggerType::kDaily) {
    return now >= at(day, rule.trigger.time_of_day.value_or(TimeOfDay{}));
  }
  const Timestamp day_end = day.next().start();
  if (now >= day_end + options_.rule_grace_ms) return true;

  std::map<std::string, bool> relevant_task;
  bool any = false;
  for (const auto& o : store_.list_occurrences_for_cohort_day(rule.action.source_cohort_id, day)) {
    auto it = relevant_task.find(o.task_id);
    if (it == relevant_task.end()) {
      auto task = store_.find_task(o.task_id);
      auto ts = task ? store_.find_testset(task->testset_id) : std::nullopt;
      it = relevant_task.emplace(o.task_id, ts && testset_has_kind(*ts, rule.trigger.worker_kind))
               .first;
    }
    if (!it->second) continue;
    any = true;
    if (open_status(o.status)) return false;
  }
  if (!any && now < day_end) return false;

  for (const auto& ds : store_.list_datasets(rule.study_id)) {
    if (ds.day != day || ds.status == DatasetStatus::kProcessed) continue;
    auto ts = store_.find_testset(ds.testset_id);
    const Test* test = ts ? ts->find_test(ds.test_id) : nullptr;
    if (!test || worker_kind_for(test->kind) != rule.trigger.worker_kind) continue;
    if (ds.status == DatasetStatus::kOpen) return false;
    auto jobs = queue_.jobs_for_dataset(ds.dataset_id);
    if (jobs.empty() || jobs.back().state != queue::JobState::kDead) return false;
  }
  return true;
}

std::vector<PendingTask> CtmService::poll_tasks(const Credential& who,
                                                const std::string& device_id,
                                                std::optional<Timestamp> now) {
  Subject subject = device_subject(who, device_id);
  const Timestamp t = now.value_or(clock_.now());
  std::map<std::string, TestSet> testsets;
  std::vector<PendingTask> out;
  for (auto& o : store_.list_open_occurrences_for_subject(subject.subject_id, t)) {
    if (o.status == OccurrenceStatus::kPending &&
        store_.compare_and_set_status(o.occurrence_id, {OccurrenceStatus::kPending},
                                      OccurrenceStatus::kDelivered)) {
      o.status = OccurrenceStatus::kDelivered;
    }
    auto task = store_.find_task(o.task_id);
    if (!testsets.contains(task->testset_id)) {
      testsets.emplace(task->testset_id, *store_.find_testset(task->testset_id));
    }
    out.push_back(PendingTask{o, testsets.at(task->testset_id)});
  }
  return out;
}

void CtmService::authorize_device(const Credential& who, const std::string& device_id) const {
  device_subject(who, device_id);
}

IngestOutcome CtmService::upload(const Credential& who, const std::string& device_id,
                                 const UploadEnvelope& envelope) {
  Subject subject = device_subject(who, device_id);
  return ingestor_.ingest(subject.subject_id, envelope);
}

AnalyticResult CtmService::submit_result(const Credential& who, const ResultSubmission& s) {
  require_worker(who);
  auto ds = store_.find_dataset(s.dataset_id);
  if (!ds) throw Error(ErrorCode::kNotFound, "unknown dataset " + s.dataset_id);
  auto dp = store_.find_datapoint(s.datapoint_id);
  if (!dp) throw Error(ErrorCode::kNotFound, "unknown datapoint " + s.datapoint_id);
  if (store_.dataset_of(dp->datapoint_id) != s.dataset_id) {
    throw Error(ErrorCode::kValidation, s.datapoint_id + " is not part of " + s.dataset_id);
  }
  auto ts = store_.find_testset(ds->testset_id);
  const Test* test = ts ? ts->find_test(ds->test_id) : nullptr;
  if (!test || worker_kind_for(test->kind) != s.worker_kind) {
    throw Error(ErrorCode::kValidation,
                "worker kind " + s.worker_kind + " does not process " + ds->test_id);
  }
  AnalyticResult r;
  r.result_id = ids_.next(EntityKind::kResult);
  r.study_id = ds->study_id;
  r.dataset_id = ds->dataset_id;
  r.datapoint_id = dp->datapoint_id;
  r.subject_id = dp->subject_id;
  r.occurrence_id = dp->occurrence_id;
  r.test_id = dp->test_id;
  r.worker_kind = s.worker_kind;
  r.collected_at = dp->collected_at;
  r.produced_at = clock_.now();
  r.body = s.body;
  throw_if_invalid(validate(r), "result");
  return db_.transaction([&] {
    AnalyticResult stored = store_.upsert_result(r);
    store_.compare_and_set_status(dp->occurrence_id,
                                  {OccurrenceStatus::kPending, OccurrenceStatus::kDelivered},
                                  OccurrenceStatus::kCompleted);
    return stored;
  });
}

DatasetDescriptor CtmService::describe_dataset(const Credential& who,
                                               const std::string& dataset_id) const {
  auto ds = store_.find_dataset(dataset_id);
  if (who.role != Role::kWorker) {
    if (who.role != Role::kResearcher) forbidden("researcher or worker credential required");
    if (!ds) throw Error(ErrorCode::kNotFound, "unknown dataset " + dataset_id);
    if (ds->study_id != who.study_id) forbidden(dataset_id + " belongs to another study");
  }
  if (!ds) throw Error(ErrorCode::kNotFound, "unknown dataset " + dataset_id);
  auto ts = store_.find_testset(ds->testset_id);
  const Test* test = ts ? ts->find_test(ds->test_id) : nullptr;
  if (!test) throw Error(ErrorCode::kInternal, "dataset " + dataset_id + " has no test");
  return DatasetDescriptor{*ds, *test, store_.list_dataset_datapoints(dataset_id)};
}

bool CtmService::flush_dataset(const Credential& who, const std::string& dataset_id) {
  describe_dataset(who, dataset_id);
  return ingestor_.flush(dataset_id);
}

std::optional<ClaimedJob> CtmService::claim(const Credential& who, const std::string& worker_kind,
                                            std::int64_t lease_ms) {
  require_worker(who);
  auto job = queue_.claim(worker_kind, lease_ms);
  if (!job) return std::nullopt;
  return ClaimedJob{*job, describe_dataset(who, job->dataset_id)};
}

queue::JobState CtmService::ack(const Credential& who, const std::string& job_id,
                                int lease_attempts, queue::Outcome outcome,
                                const std::string& reason) {
  require_worker(who);
  return db_.transaction([&] {
    auto state = queue_.ack(job_id, lease_attempts, outcome, reason);
    if (state == queue::JobState::kDone) {
      auto job = queue_.find(job_id);
      store_.compare_and_set_dataset_status(job->dataset_id, DatasetStatus::kPublished,
                                            DatasetStatus::kProcessed);
    }
    return state;
  });
}

std::vector<std::uint8_t> CtmService::get_object(const Credential& who,
                                                 const std::string& sha256) const {
  require_worker(who);
  if (!is_hex_digest(sha256)) throw Error(ErrorCode::kValidation, "malformed digest");
  return objects_.get(ObjectRef{sha256, 0, ""});
}

std::vector<AnalyticResult> CtmService::fetch_results(const Credential& who,
                                                      store::ResultQuery query) const {
  switch (who.role) {
    case Role::kWorker:
      break;
    case Role::kResearcher:
      require_researcher(who, query.study_id);
      if (query.subject_id) require_owned(query.study_id, EntityKind::kSubject, *query.subject_id);
      break;
    case Role::kDevice:
      if (who.study_id != query.study_id) forbidden("credential is scoped to another study");
      if (query.subject_id && query.subject_id != who.subject_id) {
        forbidden("devices may only read their own subject's results");
      }
      query.subject_id = who.subject_id;
      break;
  }
  return store_.query_results(query);
}

std::vector<Datapoint> CtmService::list_datapoints(const Credential& who,
                                                   const std::string& study_id) const {
  require_researcher(who, study_id);
  return store_.list_datapoints(study_id);
}

std::vector<Dataset> CtmService::list_datasets(const Credential& who,
                                               const std::string& study_id) const {
  require_researcher(who, study_id);
  return store_.list_datasets(study_id);
}

std::vector<store::VaultEntry> CtmService::export_vault(const Credential& who,
                                                        const std::string& study_id) const {
  require_researcher(who, study_id);
  return store_.export_vault(study_id);
}

Json CtmService::study_board(const Credential& who, const std::string& study_id) const {
  require_researcher(who, study_id);
  Json cohorts = Json::array();
  for (const auto& c : store_.list_cohorts(study_id)) {
    Json row{{"cohort_id", c.cohort_id},
             {"name", c.name},
             {"origin", to_string(c.origin)},
             {"member_count", c.member_ids.size()}};
    if (c.rule_id) row["rule_id"] = *c.rule_id;
    cohorts.push_back(std::move(row));
  }
  auto tally_json = [](const store::OccurrenceTally& t) {
    return Json{{"pending", t.pending},
                {"delivered", t.delivered},
                {"completed", t.completed},
                {"expired", t.expired},
                {"total", t.total()}};
  };
  Json tasks = Json::array();
  for (const auto& t : store_.list_tasks(study_id)) {
    tasks.push_back({{"task_id", t.task_id},
                     {"testset_id", t.testset_id},
                     {"cohort_id", t.cohort_id},
                     {"schedule", t.schedule},
                     {"created_by_rule", t.created_by_rule ? Json(*t.created_by_rule) : Json()},
                     {"tally", tally_json(store_.tally_for_task(t.task_id))}});
  }
  Json rules = Json::array();
  for (const auto& r : store_.list_rules(study_id)) {
    Json last_fired;
    for (const auto& run : store_.list_rule_runs(r.rule_id)) {
      if (run.cohort_id) last_fired = format_timestamp(run.evaluated_at);
    }
    rules.push_back(
        {{"rule_id", r.rule_id}, {"name", r.name}, {"active", r.active}, {"last_fired", last_fired}});
  }
  std::map<std::string, int> datasets;
  for (const auto& ds : store_.list_datasets(study_id)) ++datasets[std::string(to_string(ds.status))];
  return Json{{"study_id", study_id},
              {"cohorts", std::move(cohorts)},
              {"tasks", std::move(tasks)},
              {"rules", std::move(rules)},
              {"occurrences", tally_json(store_.tally_for_study(study_id))},
              {"datasets", datasets},
              {"datapoints", store_.count_datapoints(study_id)},
              {"results", store_.count_results(study_id)}};
}

std::vector<queue::Job> CtmService::list_jobs(const Credential& who,
                                              std::optional<queue::JobState> state,
                                              std::optional<std::string> worker_kind) const {
  require_worker(who);
  return queue_.list(state, std::move(worker_kind));
}

queue::QueueCounts CtmService::queue_counts(const Credential& who) const {
  require_worker(who);
  return queue_.counts();
}

TickReport CtmService::tick(std::optional<Timestamp> now) {
  std::lock_guard lock(tick_mu_);
  TickReport report;
  report.now = now.value_or(clock_.now());
  const Date today = date_of(report.now);

  for (const auto& task : store_.list_all_tasks()) {
    if (!daily_active(task, today)) continue;
    report.materialized += static_cast<int>(
        db_.transaction([&] { return materialize(task, today); }).size());
  }

  for (const auto& o : store_.list_expirable(report.now)) {
    if (store_.compare_and_set_status(o.occurrence_id,
                                      {OccurrenceStatus::kPending, OccurrenceStatus::kDelivered},
                                      OccurrenceStatus::kExpired)) {
      ++report.expired;
    }
  }

  report.published = static_cast<int>(ingestor_.publish_due(report.now).size());

  for (const auto& rule : store_.list_active_rules()) {
    const Date first{std::max(date_of(rule.created_at).days, today.days - options_.rule_lookback_days)};
    for (Date d = first; d <= today; d = d.next()) {
      if (store_.find_rule_run(rule.rule_id, d)) continue;
      if (!rule_day_ready(rule, d, report.now)) continue;
      try {
        auto outcome = run_rule(rule, d, true);
        ++report.rule_runs;
        if (outcome.task) ++report.tasks_created;
      } catch (const Error& e) {
        spdlog::error("rule {} on {} failed: {}", rule.rule_id, format_date(d), e.what());
      }
    }
  }
  return report;
}

}  // namespace hg::ctm
