#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "hg/common/time.hpp"

namespace hg {

using Json = nlohmann::json;

// Enrollment attributes are schemaless; numbers are held as doubles.
using AttributeValue = std::variant<std::string, double, bool>;
using Attributes = std::map<std::string, AttributeValue>;

struct Study {
  std::string study_id;
  std::string name;
  Timestamp created_at;
};

struct Subject {
  std::string subject_id;
  std::string study_id;
  Attributes attributes;
  std::optional<std::string> device_id;
};

enum class CohortOrigin { kManual, kRuleDerived };

struct Cohort {
  std::string cohort_id;
  std::string study_id;
  std::string name;
  std::set<std::string> member_ids;
  CohortOrigin origin = CohortOrigin::kManual;
  std::optional<std::string> rule_id;  // set iff origin is rule-derived
  Timestamp created_at;
};

enum class TestKind { kPhq8, kTug, kSitToStand };

struct Test {
  std::string test_id;
  TestKind kind = TestKind::kPhq8;
  Json params = Json::object();
};

struct TestSet {
  std::string testset_id;
  std::string study_id;
  std::string name;
  std::vector<Test> tests;

  const Test* find_test(const std::string& test_id) const;
};

enum class ScheduleMode { kOnce, kDaily };

struct Schedule {
  ScheduleMode mode = ScheduleMode::kOnce;
  TimeOfDay window_start;
  TimeOfDay window_end;
  std::optional<Date> start_date;
  std::optional<Date> end_date;

  bool operator==(const Schedule&) const = default;
};

struct Task {
  std::string task_id;
  std::string study_id;
  std::string testset_id;
  std::string cohort_id;
  Schedule schedule;
  std::optional<std::string> created_by_rule;  // empty means manual
  Timestamp created_at;
};

enum class OccurrenceStatus { kPending, kDelivered, kCompleted, kExpired };

struct TaskOccurrence {
  std::string occurrence_id;
  std::string task_id;
  std::string study_id;
  std::string subject_id;
  std::string slot;  // "once" or the YYYY-MM-DD of a daily slot
  Timestamp due_start;
  Timestamp due_end;  // exclusive
  OccurrenceStatus status = OccurrenceStatus::kPending;
};

struct ObjectRef {
  std::string sha256;
  std::uint64_t size_bytes = 0;
  std::string media_type;

  bool operator==(const ObjectRef&) const = default;
};

enum class PayloadKind { kScalar, kText, kFile };

struct Payload {
  PayloadKind kind = PayloadKind::kScalar;
  double scalar = 0.0;
  std::string text;
  ObjectRef file;
};

struct Datapoint {
  std::string datapoint_id;
  std::string study_id;
  std::string subject_id;
  std::string occurrence_id;
  std::string test_id;
  Payload payload;
  Timestamp collected_at;
  Timestamp uploaded_at;
  std::string idempotency_key;
  bool late = false;
};

enum class DatasetStatus { kOpen, kPublished, kProcessed };

struct Dataset {
  std::string dataset_id;
  std::string study_id;
  std::string testset_id;
  std::string test_id;
  Date day;
  int seq = 0;  // > 0 when late uploads reopen an already published day
  std::vector<std::string> datapoint_ids;
  DatasetStatus status = DatasetStatus::kOpen;
};

struct AnalyticResult {
  std::string result_id;
  std::string study_id;
  std::string dataset_id;
  std::string datapoint_id;
  std::string subject_id;
  std::string occurrence_id;
  std::string test_id;
  std::string worker_kind;
  Timestamp collected_at;
  Timestamp produced_at;
  Json body = Json::object();
};

enum class Comparator { kLess, kLessEqual, kGreater, kGreaterEqual, kEqual };

enum class TriggerType { kOnResult, kDaily };

struct RuleTrigger {
  TriggerType type = TriggerType::kOnResult;
  std::string worker_kind;            // kind whose results carry the metric
  std::optional<TimeOfDay> time_of_day;  // daily triggers only
};

struct RulePredicate {
  std::string metric;
  Comparator comparator = Comparator::kLess;
  double value = 0.0;

  bool matches(double observed) const;
};

struct RuleAction {
  std::string target_testset_id;
  std::string sub_cohort_name;
  std::string source_cohort_id;
  TimeOfDay window_start{9 * 3'600'000};
  TimeOfDay window_end{21 * 3'600'000};
  int day_offset = 1;  // created task is due this many days after the trigger day
};

struct Rule {
  std::string rule_id;
  std::string study_id;
  std::string name;
  RuleTrigger trigger;
  RulePredicate predicate;
  RuleAction action;
  bool active = true;
  Timestamp created_at;
};

enum class Role { kResearcher, kDevice, kWorker };

struct Credential {
  std::string study_id;  // empty for worker credentials
  Role role = Role::kResearcher;
  std::optional<std::string> subject_id;  // device credentials only
};

// Enum <-> wire names.
std::string_view to_string(CohortOrigin v);
std::string_view to_string(TestKind v);
std::string_view to_string(ScheduleMode v);
std::string_view to_string(OccurrenceStatus v);
std::string_view to_string(PayloadKind v);
std::string_view to_string(DatasetStatus v);
std::string_view to_string(Comparator v);
std::string_view to_string(TriggerType v);
std::string_view to_string(Role v);

std::optional<TestKind> test_kind_from_string(std::string_view s);
std::optional<Comparator> comparator_from_string(std::string_view s);
std::optional<Role> role_from_string(std::string_view s);
std::optional<OccurrenceStatus> occurrence_status_from_string(std::string_view s);
std::optional<DatasetStatus> dataset_status_from_string(std::string_view s);
std::optional<CohortOrigin> cohort_origin_from_string(std::string_view s);
std::optional<ScheduleMode> schedule_mode_from_string(std::string_view s);
std::optional<PayloadKind> payload_kind_from_string(std::string_view s);
std::optional<TriggerType> trigger_type_from_string(std::string_view s);

// Worker kind that consumes datasets of a test kind; same spelling as the kind.
inline std::string worker_kind_for(TestKind kind) { return std::string(to_string(kind)); }

// Allowed moves: pending->delivered, pending/delivered->completed|expired.
bool can_transition(OccurrenceStatus from, OccurrenceStatus to);

// Payload schema id expected for uploads of a test kind.
std::string_view payload_schema_for(TestKind kind);

// Numeric fields a worker kind emits at the top level of its result body;
// rules may only reference these.
const std::vector<std::string>& metrics_for(std::string_view worker_kind);

}  // namespace hg
