#include "hg/domain/validate.hpp"

#include <algorithm>
#include <set>

#include "hg/common/error.hpp"

namespace hg {
namespace {

void check_id(ValidationOutcome& out, const std::string& id, EntityKind kind, const char* field) {
  if (!has_prefix(id, kind)) {
    out.push_back({"BAD_ID", std::string(field) + " '" + id + "' is not a " +
                                 std::string(id_prefix(kind)) + "_ id"});
  }
}

void check_study(ValidationOutcome& out, const std::string& study_id) {
  check_id(out, study_id, EntityKind::kStudy, "study_id");
}

}  // namespace

ValidationOutcome validate(const Study& v) {
  ValidationOutcome out;
  check_id(out, v.study_id, EntityKind::kStudy, "study_id");
  if (v.name.empty()) out.push_back({"EMPTY_NAME", "study name is empty"});
  return out;
}

ValidationOutcome validate(const Subject& v) {
  ValidationOutcome out;
  check_id(out, v.subject_id, EntityKind::kSubject, "subject_id");
  check_study(out, v.study_id);
  for (const auto& [key, value] : v.attributes) {
    if (key.empty()) out.push_back({"BAD_ATTRIBUTE", "empty attribute name"});
  }
  if (v.device_id && v.device_id->empty()) {
    out.push_back({"BAD_DEVICE", "device_id present but empty"});
  }
  return out;
}

ValidationOutcome validate(const Cohort& v, const StudyLookup& lookup) {
  ValidationOutcome out;
  check_id(out, v.cohort_id, EntityKind::kCohort, "cohort_id");
  check_study(out, v.study_id);
  if (v.name.empty()) out.push_back({"EMPTY_NAME", "cohort name is empty"});
  if ((v.origin == CohortOrigin::kRuleDerived) != v.rule_id.has_value()) {
    out.push_back({"BAD_ORIGIN", "rule_id must be set exactly for rule-derived cohorts"});
  }
  for (const auto& member : v.member_ids) {
    auto owner = lookup.study_of(EntityKind::kSubject, member);
    if (!owner) {
      out.push_back({"UNKNOWN_MEMBER", member});
    } else if (*owner != v.study_id) {
      out.push_back({"CROSS_STUDY_MEMBER", member});
    }
  }
  return out;
}

Json normalized_test_params(TestKind kind, const Json& params) {
  if (!params.is_object()) throw Error(ErrorCode::kValidation, "test params must be an object");
  Json out;
  std::set<std::string> allowed;
  switch (kind) {
    case TestKind::kPhq8: {
      allowed = {"language"};
      out["language"] = params.value("language", std::string("en"));
      break;
    }
    case TestKind::kTug: {
      allowed = {"min_walk_secs"};
      const Json& secs = params.contains("min_walk_secs") ? params["min_walk_secs"] : Json(30);
      if (!secs.is_number() || secs.get<double>() <= 0) {
        throw Error(ErrorCode::kValidation, "tug.min_walk_secs must be a positive number");
      }
      out["min_walk_secs"] = secs.get<double>();
      break;
    }
    case TestKind::kSitToStand: {
      allowed = {"cycles"};
      const Json& cycles = params.contains("cycles") ? params["cycles"] : Json(5);
      if (!cycles.is_number_integer() || cycles.get<long long>() < 1) {
        throw Error(ErrorCode::kValidation, "sit_to_stand.cycles must be an integer >= 1");
      }
      out["cycles"] = cycles.get<long long>();
      break;
    }
  }
  for (const auto& [key, value] : params.items()) {
    if (!allowed.contains(key)) {
      throw Error(ErrorCode::kValidation, "unknown parameter '" + key + "' for test kind " +
                                              std::string(to_string(kind)));
    }
  }
  return out;
}

ValidationOutcome validate(const Test& v) {
  ValidationOutcome out;
  check_id(out, v.test_id, EntityKind::kTest, "test_id");
  try {
    Json normalized = normalized_test_params(v.kind, v.params);
    if (normalized != v.params) {
      out.push_back({"BAD_TEST_PARAMS", "params are not in normalized form"});
    }
  } catch (const Error& e) {
    out.push_back({"BAD_TEST_PARAMS", e.what()});
  }
  return out;
}

ValidationOutcome validate(const TestSet& v) {
  ValidationOutcome out;
  check_id(out, v.testset_id, EntityKind::kTestSet, "testset_id");
  check_study(out, v.study_id);
  if (v.name.empty()) out.push_back({"EMPTY_NAME", "test-set name is empty"});
  if (v.tests.empty()) out.push_back({"EMPTY_TESTSET", "test-set has no tests"});
  std::set<std::string> seen;
  for (const auto& t : v.tests) {
    if (!seen.insert(t.test_id).second) out.push_back({"DUPLICATE_TEST", t.test_id});
    auto inner = validate(t);
    out.insert(out.end(), inner.begin(), inner.end());
  }
  return out;
}

ValidationOutcome validate(const Schedule& v) {
  ValidationOutcome out;
  if (!(v.window_start < v.window_end)) {
    out.push_back({"BAD_WINDOW", "window_start must precede window_end"});
  }
  if (v.window_end.ms > kMsPerDay) out.push_back({"BAD_WINDOW", "window_end after 24:00"});
  if (v.start_date && v.end_date && *v.end_date < *v.start_date) {
    out.push_back({"BAD_DATE_RANGE", "end_date precedes start_date"});
  }
  return out;
}

ValidationOutcome validate(const Task& v, const StudyLookup& lookup) {
  ValidationOutcome out;
  check_id(out, v.task_id, EntityKind::kTask, "task_id");
  check_study(out, v.study_id);
  auto ts_owner = lookup.study_of(EntityKind::kTestSet, v.testset_id);
  if (!ts_owner) {
    out.push_back({"UNKNOWN_TESTSET", v.testset_id});
  } else if (*ts_owner != v.study_id) {
    out.push_back({"CROSS_STUDY_TESTSET", v.testset_id});
  }
  auto co_owner = lookup.study_of(EntityKind::kCohort, v.cohort_id);
  if (!co_owner) {
    out.push_back({"UNKNOWN_COHORT", v.cohort_id});
  } else if (*co_owner != v.study_id) {
    out.push_back({"CROSS_STUDY_COHORT", v.cohort_id});
  }
  auto sched = validate(v.schedule);
  out.insert(out.end(), sched.begin(), sched.end());
  if (v.created_by_rule) check_id(out, *v.created_by_rule, EntityKind::kRule, "created_by.rule");
  return out;
}

ValidationOutcome validate(const TaskOccurrence& v) {
  ValidationOutcome out;
  check_id(out, v.occurrence_id, EntityKind::kOccurrence, "occurrence_id");
  check_id(out, v.task_id, EntityKind::kTask, "task_id");
  check_id(out, v.subject_id, EntityKind::kSubject, "subject_id");
  check_study(out, v.study_id);
  if (!(v.due_start < v.due_end)) out.push_back({"BAD_DUE_WINDOW", v.occurrence_id});
  if (v.slot.empty()) out.push_back({"BAD_SLOT", "empty slot"});
  return out;
}

ValidationOutcome validate(const Datapoint& v) {
  ValidationOutcome out;
  check_id(out, v.datapoint_id, EntityKind::kDatapoint, "datapoint_id");
  check_study(out, v.study_id);
  check_id(out, v.occurrence_id, EntityKind::kOccurrence, "occurrence_id");
  check_id(out, v.test_id, EntityKind::kTest, "test_id");
  if (v.idempotency_key.empty()) out.push_back({"MISSING_IDEMPOTENCY_KEY", v.datapoint_id});
  if (v.payload.kind == PayloadKind::kFile &&
      (v.payload.file.sha256.size() != 64 || v.payload.file.media_type.empty())) {
    out.push_back({"BAD_OBJECT_REF", v.payload.file.sha256});
  }
  return out;
}

ValidationOutcome validate(const Dataset& v) {
  ValidationOutcome out;
  check_id(out, v.dataset_id, EntityKind::kDataset, "dataset_id");
  check_study(out, v.study_id);
  check_id(out, v.test_id, EntityKind::kTest, "test_id");
  std::set<std::string> seen;
  for (const auto& dp : v.datapoint_ids) {
    if (!seen.insert(dp).second) out.push_back({"DUPLICATE_DATAPOINT", dp});
  }
  return out;
}

ValidationOutcome validate(const AnalyticResult& v) {
  ValidationOutcome out;
  check_id(out, v.result_id, EntityKind::kResult, "result_id");
  if (v.datapoint_id.empty() && v.dataset_id.empty()) {
    out.push_back({"MISSING_TARGET", "result references neither datapoint nor dataset"});
  }
  if (v.worker_kind.empty()) out.push_back({"MISSING_WORKER_KIND", v.result_id});
  if (!v.body.is_object()) out.push_back({"BAD_BODY", "result body must be an object"});
  return out;
}

ValidationOutcome validate(const Rule& v, const StudyLookup& lookup) {
  ValidationOutcome out;
  check_id(out, v.rule_id, EntityKind::kRule, "rule_id");
  check_study(out, v.study_id);
  const auto& metrics = metrics_for(v.trigger.worker_kind);
  if (metrics.empty()) {
    out.push_back({"UNKNOWN_WORKER_KIND", v.trigger.worker_kind});
  } else if (std::find(metrics.begin(), metrics.end(), v.predicate.metric) == metrics.end()) {
    out.push_back({"UNKNOWN_METRIC", v.predicate.metric + " is not emitted by " +
                                         v.trigger.worker_kind});
  }
  if (v.trigger.type == TriggerType::kDaily && !v.trigger.time_of_day) {
    out.push_back({"MISSING_TIME_OF_DAY", "daily triggers need time_of_day"});
  }
  auto ts_owner = lookup.study_of(EntityKind::kTestSet, v.action.target_testset_id);
  if (!ts_owner) {
    out.push_back({"UNKNOWN_TESTSET", v.action.target_testset_id});
  } else if (*ts_owner != v.study_id) {
    out.push_back({"CROSS_STUDY_TESTSET", v.action.target_testset_id});
  }
  auto co_owner = lookup.study_of(EntityKind::kCohort, v.action.source_cohort_id);
  if (!co_owner) {
    out.push_back({"UNKNOWN_COHORT", v.action.source_cohort_id});
  } else if (*co_owner != v.study_id) {
    out.push_back({"CROSS_STUDY_COHORT", v.action.source_cohort_id});
  }
  if (v.action.sub_cohort_name.empty()) out.push_back({"EMPTY_NAME", "sub_cohort_name"});
  if (!(v.action.window_start < v.action.window_end)) {
    out.push_back({"BAD_WINDOW", "action window_start must precede window_end"});
  }
  if (v.action.day_offset < 0) out.push_back({"BAD_DAY_OFFSET", "day_offset must be >= 0"});
  return out;
}

void throw_if_invalid(const ValidationOutcome& outcome, const std::string& what) {
  if (outcome.empty()) return;
  std::string message = what + " invalid:";
  for (const auto& v : outcome) message += " " + v.code + "(" + v.detail + ")";
  throw Error(ErrorCode::kValidation, message);
}

}  // namespace hg
