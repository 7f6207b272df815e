#include "hg/domain/entities.hpp"

#include <array>
#include <utility>

namespace hg {
namespace {

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) {
  for (const auto& [e, name] : table) {
    if (e == v) return name;
  }
  return "unknown";
}

template <typename E, std::size_t N>
std::optional<E> value_of(const std::array<std::pair<E, std::string_view>, N>& table,
                          std::string_view s) {
  for (const auto& [e, name] : table) {
    if (name == s) return e;
  }
  return std::nullopt;
}

constexpr std::array<std::pair<CohortOrigin, std::string_view>, 2> kOrigins{{
    {CohortOrigin::kManual, "manual"},
    {CohortOrigin::kRuleDerived, "rule_derived"},
}};
constexpr std::array<std::pair<TestKind, std::string_view>, 3> kTestKinds{{
    {TestKind::kPhq8, "phq8"},
    {TestKind::kTug, "tug"},
    {TestKind::kSitToStand, "sit_to_stand"},
}};
constexpr std::array<std::pair<ScheduleMode, std::string_view>, 2> kModes{{
    {ScheduleMode::kOnce, "once"},
    {ScheduleMode::kDaily, "daily"},
}};
constexpr std::array<std::pair<OccurrenceStatus, std::string_view>, 4> kOccStatus{{
    {OccurrenceStatus::kPending, "pending"},
    {OccurrenceStatus::kDelivered, "delivered"},
    {OccurrenceStatus::kCompleted, "completed"},
    {OccurrenceStatus::kExpired, "expired"},
}};
constexpr std::array<std::pair<PayloadKind, std::string_view>, 3> kPayloadKinds{{
    {PayloadKind::kScalar, "scalar"},
    {PayloadKind::kText, "text"},
    {PayloadKind::kFile, "file"},
}};
constexpr std::array<std::pair<DatasetStatus, std::string_view>, 3> kDatasetStatus{{
    {DatasetStatus::kOpen, "open"},
    {DatasetStatus::kPublished, "published"},
    {DatasetStatus::kProcessed, "processed"},
}};
constexpr std::array<std::pair<Comparator, std::string_view>, 5> kComparators{{
    {Comparator::kLess, "<"},
    {Comparator::kLessEqual, "<="},
    {Comparator::kGreater, ">"},
    {Comparator::kGreaterEqual, ">="},
    {Comparator::kEqual, "=="},
}};
constexpr std::array<std::pair<TriggerType, std::string_view>, 2> kTriggers{{
    {TriggerType::kOnResult, "on_result"},
    {TriggerType::kDaily, "daily"},
}};
constexpr std::array<std::pair<Role, std::string_view>, 3> kRoles{{
    {Role::kResearcher, "researcher"},
    {Role::kDevice, "device"},
    {Role::kWorker, "worker"},
}};

}  // namespace

std::string_view to_string(CohortOrigin v) { return name_of(kOrigins, v); }
std::string_view to_string(TestKind v) { return name_of(kTestKinds, v); }
std::string_view to_string(ScheduleMode v) { return name_of(kModes, v); }
std::string_view to_string(OccurrenceStatus v) { return name_of(kOccStatus, v); }
std::string_view to_string(PayloadKind v) { return name_of(kPayloadKinds, v); }
std::string_view to_string(DatasetStatus v) { return name_of(kDatasetStatus, v); }
std::string_view to_string(Comparator v) { return name_of(kComparators, v); }
std::string_view to_string(TriggerType v) { return name_of(kTriggers, v); }
std::string_view to_string(Role v) { return name_of(kRoles, v); }

std::optional<TestKind> test_kind_from_string(std::string_view s) {
  return value_of(kTestKinds, s);
}
std::optional<Comparator> comparator_from_string(std::string_view s) {
  return value_of(kComparators, s);
}
std::optional<Role> role_from_string(std::string_view s) { return value_of(kRoles, s); }
std::optional<OccurrenceStatus> occurrence_status_from_string(std::string_view s) {
  return value_of(kOccStatus, s);
}
std::optional<DatasetStatus> dataset_status_from_string(std::string_view s) {
  return value_of(kDatasetStatus, s);
}

std::optional<CohortOrigin> cohort_origin_from_string(std::string_view s) {
  return value_of(kOrigins, s);
}
std::optional<ScheduleMode> schedule_mode_from_string(std::string_view s) {
  return value_of(kModes, s);
}
std::optional<PayloadKind> payload_kind_from_string(std::string_view s) {
  return value_of(kPayloadKinds, s);
}
std::optional<TriggerType> trigger_type_from_string(std::string_view s) {
  return value_of(kTriggers, s);
}

const Test* TestSet::find_test(const std::string& test_id) const {
  for (const auto& t : tests) {
    if (t.test_id == test_id) return &t;
  }
  return nullptr;
}

bool RulePredicate::matches(double observed) const {
  switch (comparator) {
    case Comparator::kLess: return observed < value;
    case Comparator::kLessEqual: return observed <= value;
    case Comparator::kGreater: return observed > value;
    case Comparator::kGreaterEqual: return observed >= value;
    case Comparator::kEqual: return observed == value;
  }
  return false;
}

bool can_transition(OccurrenceStatus from, OccurrenceStatus to) {
  using S = OccurrenceStatus;
  switch (from) {
    case S::kPending:
      return to == S::kDelivered || to == S::kCompleted || to == S::kExpired;
    case S::kDelivered:
      return to == S::kCompleted || to == S::kExpired;
    case S::kCompleted:
    case S::kExpired:
      return false;
  }
  return false;
}

std::string_view payload_schema_for(TestKind kind) {
  switch (kind) {
    case TestKind::kPhq8: return "phq8/v1";
    case TestKind::kTug: return "accel/v1";
    case TestKind::kSitToStand: return "pose2d/v1";
  }
  return "";
}

const std::vector<std::string>& metrics_for(std::string_view worker_kind) {
  static const std::vector<std::string> kPhq8{"total_score"};
  static const std::vector<std::string> kTug{"daily_mean", "max_tug_seconds"};
  static const std::vector<std::string> kSts{"total_cycles", "total_hesitations"};
  static const std::vector<std::string> kNone;
  if (worker_kind == "phq8") return kPhq8;
  if (worker_kind == "tug") return kTug;
  if (worker_kind == "sit_to_stand") return kSts;
  return kNone;
}

}  // namespace hg
