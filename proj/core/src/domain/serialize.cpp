#include "hg/domain/serialize.hpp"

#include "hg/common/error.hpp"

namespace hg {
namespace {

[[noreturn]] void bad_field(const char* key, const std::string& why) {
  throw Error(ErrorCode::kValidation, std::string("field '") + key + "': " + why);
}

template <typename E>
E require_enum(const Json& j, const char* key, std::optional<E> (*parse)(std::string_view)) {
  std::string s = require_string(j, key);
  auto v = parse(s);
  if (!v) bad_field(key, "unknown value '" + s + "'");
  return *v;
}

Timestamp require_ts(const Json& j, const char* key) {
  std::string s = require_string(j, key);
  auto ts = try_parse_timestamp(s);
  if (!ts) bad_field(key, "not an ISO-8601 UTC timestamp: '" + s + "'");
  return *ts;
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) bad_field(key, "expected string");
  return it->get<std::string>();
}

}  // namespace

const Json& require_field(const Json& j, const char* key) {
  if (!j.is_object()) throw Error(ErrorCode::kValidation, "expected a JSON object");
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) bad_field(key, "missing");
  return *it;
}

std::string require_string(const Json& j, const char* key) {
  const Json& v = require_field(j, key);
  if (!v.is_string()) bad_field(key, "expected string");
  return v.get<std::string>();
}

double require_number(const Json& j, const char* key) {
  const Json& v = require_field(j, key);
  if (!v.is_number()) bad_field(key, "expected number");
  return v.get<double>();
}

Json attribute_to_json(const AttributeValue& v) {
  return std::visit([](const auto& x) { return Json(x); }, v);
}

AttributeValue attribute_from_json(const Json& j) {
  if (j.is_string()) {
    return j.get<std::string>();
  } else if (j.is_boolean()) {
    return j.get<bool>();
  } else if (j.is_number()) {
    return j.get<double>();
  } else {
    throw Error(ErrorCode::kValidation, "attribute values must be string, number or boolean");
  }
}

void to_json(Json& j, const Study& v) {
  j = Json{{"study_id", v.study_id},
           {"name", v.name},
           {"created_at", format_timestamp(v.created_at)}};
}

void from_json(const Json& j, Study& v) {
  v.study_id = require_string(j, "study_id");
  v.name = require_string(j, "name");
  v.created_at = require_ts(j, "created_at");
}

void to_json(Json& j, const Subject& v) {
  j = Json{{"subject_id", v.subject_id}, {"study_id", v.study_id}};
  Json attrs = Json::object();
  for (const auto& [k, a] : v.attributes) attrs[k] = attribute_to_json(a);
  j["attributes"] = std::move(attrs);
  if (v.device_id) j["device_id"] = *v.device_id;
}

void from_json(const Json& j, Subject& v) {
  v.subject_id = require_string(j, "subject_id");
  v.study_id = require_string(j, "study_id");
  v.attributes.clear();
  if (auto it = j.find("attributes"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) bad_field("attributes", "expected object");
    for (const auto& [k, a] : it->items()) v.attributes[k] = attribute_from_json(a);
  }
  v.device_id = optional_string(j, "device_id");
}

void to_json(Json& j, const Cohort& v) {
  j = Json{{"cohort_id", v.cohort_id},
           {"study_id", v.study_id},
           {"name", v.name},
           {"member_ids", v.member_ids},
           {"origin", to_string(v.origin)},
           {"created_at", format_timestamp(v.created_at)}};
  if (v.rule_id) j["rule_id"] = *v.rule_id;
}

void from_json(const Json& j, Cohort& v) {
  v.cohort_id = require_string(j, "cohort_id");
  v.study_id = require_string(j, "study_id");
  v.name = require_string(j, "name");
  v.member_ids.clear();
  for (const auto& m : require_field(j, "member_ids")) v.member_ids.insert(m.get<std::string>());
  v.origin = require_enum(j, "origin", &cohort_origin_from_string);
  v.rule_id = optional_string(j, "rule_id");
  v.created_at = require_ts(j, "created_at");
}

void to_json(Json& j, const Test& v) {
  j = Json{{"test_id", v.test_id}, {"kind", to_string(v.kind)}, {"params", v.params}};
}

void from_json(const Json& j, Test& v) {
  v.test_id = require_string(j, "test_id");
  v.kind = require_enum(j, "kind", &test_kind_from_string);
  auto it = j.find("params");
  v.params = (it == j.end() || it->is_null()) ? Json::object() : *it;
}

void to_json(Json& j, const TestSet& v) {
  j = Json{{"testset_id", v.testset_id},
           {"study_id", v.study_id},
           {"name", v.name},
           {"tests", v.tests}};
}

void from_json(const Json& j, TestSet& v) {
  v.testset_id = require_string(j, "testset_id");
  v.study_id = require_string(j, "study_id");
  v.name = require_string(j, "name");
  v.tests = require_field(j, "tests").get<std::vector<Test>>();
}

void to_json(Json& j, const Schedule& v) {
  j = Json{{"mode", to_string(v.mode)},
           {"window_start", format_time_of_day(v.window_start)},
           {"window_end", format_time_of_day(v.window_end)}};
  if (v.start_date) j["start_date"] = format_date(*v.start_date);
  if (v.end_date) j["end_date"] = format_date(*v.end_date);
}

void from_json(const Json& j, Schedule& v) {
  v.mode = require_enum(j, "mode", &schedule_mode_from_string);
  v.window_start = parse_time_of_day(require_string(j, "window_start"));
  v.window_end = parse_time_of_day(require_string(j, "window_end"));
  auto sd = optional_string(j, "start_date");
  v.start_date = sd ? std::optional(parse_date(*sd)) : std::nullopt;
  auto ed = optional_string(j, "end_date");
  v.end_date = ed ? std::optional(parse_date(*ed)) : std::nullopt;
}

void to_json(Json& j, const Task& v) {
  j = Json{{"task_id", v.task_id},
           {"study_id", v.study_id},
           {"testset_id", v.testset_id},
           {"cohort_id", v.cohort_id},
           {"schedule", v.schedule},
           {"created_at", format_timestamp(v.created_at)}};
  if (v.created_by_rule) {
    j["created_by"] = Json{{"rule", *v.created_by_rule}};
  } else {
    j["created_by"] = "manual";
  }
}

void from_json(const Json& j, Task& v) {
  v.task_id = require_string(j, "task_id");
  v.study_id = require_string(j, "study_id");
  v.testset_id = require_string(j, "testset_id");
  v.cohort_id = require_string(j, "cohort_id");
  v.schedule = require_field(j, "schedule").get<Schedule>();
  v.created_at = require_ts(j, "created_at");
  const Json& by = require_field(j, "created_by");
  if (by.is_object()) {
    v.created_by_rule = require_string(by, "rule");
  } else {
    v.created_by_rule.reset();
  }
}

void to_json(Json& j, const TaskOccurrence& v) {
  j = Json{{"occurrence_id", v.occurrence_id},
           {"task_id", v.task_id},
           {"study_id", v.study_id},
           {"subject_id", v.subject_id},
           {"slot", v.slot},
           {"due_window", {format_timestamp(v.due_start), format_timestamp(v.due_end)}},
           {"status", to_string(v.status)}};
}

void from_json(const Json& j, TaskOccurrence& v) {
  v.occurrence_id = require_string(j, "occurrence_id");
  v.task_id = require_string(j, "task_id");
  v.study_id = require_string(j, "study_id");
  v.subject_id = require_string(j, "subject_id");
  v.slot = require_string(j, "slot");
  const Json& w = require_field(j, "due_window");
  if (!w.is_array() || w.size() != 2) bad_field("due_window", "expected [start, end]");
  v.due_start = parse_timestamp(w[0].get<std::string>());
  v.due_end = parse_timestamp(w[1].get<std::string>());
  v.status = require_enum(j, "status", &occurrence_status_from_string);
}

void to_json(Json& j, const ObjectRef& v) {
  j = Json{{"sha256", v.sha256}, {"size_bytes", v.size_bytes}, {"media_type", v.media_type}};
}

void from_json(const Json& j, ObjectRef& v) {
  v.sha256 = require_string(j, "sha256");
  const Json& size = require_field(j, "size_bytes");
  if (!size.is_number_unsigned() && !(size.is_number_integer() && size.get<long long>() >= 0)) {
    bad_field("size_bytes", "expected non-negative integer");
  }
  v.size_bytes = size.get<std::uint64_t>();
  v.media_type = require_string(j, "media_type");
}

void to_json(Json& j, const Payload& v) {
  j = Json{{"kind", to_string(v.kind)}};
  switch (v.kind) {
    case PayloadKind::kScalar: j["value"] = v.scalar; break;
    case PayloadKind::kText: j["text"] = v.text; break;
    case PayloadKind::kFile: j["object"] = v.file; break;
  }
}

void from_json(const Json& j, Payload& v) {
  v.kind = require_enum(j, "kind", &payload_kind_from_string);
  switch (v.kind) {
    case PayloadKind::kScalar: v.scalar = require_number(j, "value"); break;
    case PayloadKind::kText: v.text = require_string(j, "text"); break;
    case PayloadKind::kFile: v.file = require_field(j, "object").get<ObjectRef>(); break;
  }
}

void to_json(Json& j, const Datapoint& v) {
  j = Json{{"datapoint_id", v.datapoint_id},
           {"study_id", v.study_id},
           {"subject_id", v.subject_id},
           {"occurrence_id", v.occurrence_id},
           {"test_id", v.test_id},
           {"payload", v.payload},
           {"collected_at", format_timestamp(v.collected_at)},
           {"uploaded_at", format_timestamp(v.uploaded_at)},
           {"idempotency_key", v.idempotency_key},
           {"late", v.late}};
}

void from_json(const Json& j, Datapoint& v) {
  v.datapoint_id = require_string(j, "datapoint_id");
  v.study_id = require_string(j, "study_id");
  v.subject_id = require_string(j, "subject_id");
  v.occurrence_id = require_string(j, "occurrence_id");
  v.test_id = require_string(j, "test_id");
  v.payload = require_field(j, "payload").get<Payload>();
  v.collected_at = require_ts(j, "collected_at");
  v.uploaded_at = require_ts(j, "uploaded_at");
  v.idempotency_key = require_string(j, "idempotency_key");
  v.late = j.value("late", false);
}

void to_json(Json& j, const Dataset& v) {
  j = Json{{"dataset_id", v.dataset_id},
           {"study_id", v.study_id},
           {"testset_id", v.testset_id},
           {"test_id", v.test_id},
           {"day", format_date(v.day)},
           {"seq", v.seq},
           {"datapoint_ids", v.datapoint_ids},
           {"status", to_string(v.status)}};
}

void from_json(const Json& j, Dataset& v) {
  v.dataset_id = require_string(j, "dataset_id");
  v.study_id = require_string(j, "study_id");
  v.testset_id = require_string(j, "testset_id");
  v.test_id = require_string(j, "test_id");
  v.day = parse_date(require_string(j, "day"));
  v.seq = j.value("seq", 0);
  v.datapoint_ids = require_field(j, "datapoint_ids").get<std::vector<std::string>>();
  v.status = require_enum(j, "status", &dataset_status_from_string);
}

void to_json(Json& j, const AnalyticResult& v) {
  j = Json{{"result_id", v.result_id},
           {"study_id", v.study_id},
           {"dataset_id", v.dataset_id},
           {"datapoint_id", v.datapoint_id},
           {"subject_id", v.subject_id},
           {"occurrence_id", v.occurrence_id},
           {"test_id", v.test_id},
           {"worker_kind", v.worker_kind},
           {"collected_at", format_timestamp(v.collected_at)},
           {"produced_at", format_timestamp(v.produced_at)},
           {"body", v.body}};
}

void from_json(const Json& j, AnalyticResult& v) {
  v.result_id = j.value("result_id", std::string());
  v.study_id = j.value("study_id", std::string());
  v.dataset_id = j.value("dataset_id", std::string());
  v.datapoint_id = require_string(j, "datapoint_id");
  v.subject_id = j.value("subject_id", std::string());
  v.occurrence_id = j.value("occurrence_id", std::string());
  v.test_id = j.value("test_id", std::string());
  v.worker_kind = require_string(j, "worker_kind");
  auto ca = optional_string(j, "collected_at");
  v.collected_at = ca ? parse_timestamp(*ca) : Timestamp{};
  auto pa = optional_string(j, "produced_at");
  v.produced_at = pa ? parse_timestamp(*pa) : Timestamp{};
  v.body = require_field(j, "body");
  if (!v.body.is_object()) bad_field("body", "expected object");
}

void to_json(Json& j, const RuleTrigger& v) {
  j = Json{{"type", to_string(v.type)}, {"worker_kind", v.worker_kind}};
  if (v.time_of_day) j["time_of_day"] = format_time_of_day(*v.time_of_day);
}

void from_json(const Json& j, RuleTrigger& v) {
  v.type = require_enum(j, "type", &trigger_type_from_string);
  v.worker_kind = require_string(j, "worker_kind");
  auto tod = optional_string(j, "time_of_day");
  v.time_of_day = tod ? std::optional(parse_time_of_day(*tod)) : std::nullopt;
}

void to_json(Json& j, const RulePredicate& v) {
  j = Json{{"metric", v.metric}, {"comparator", to_string(v.comparator)}, {"value", v.value}};
}

void from_json(const Json& j, RulePredicate& v) {
  v.metric = require_string(j, "metric");
  v.comparator = require_enum(j, "comparator", &comparator_from_string);
  v.value = require_number(j, "value");
}

void to_json(Json& j, const RuleAction& v) {
  j = Json{{"target_testset_id", v.target_testset_id},
           {"sub_cohort_name", v.sub_cohort_name},
           {"source_cohort_id", v.source_cohort_id},
           {"window_start", format_time_of_day(v.window_start)},
           {"window_end", format_time_of_day(v.window_end)},
           {"day_offset", v.day_offset}};
}

void from_json(const Json& j, RuleAction& v) {
  v.target_testset_id = require_string(j, "target_testset_id");
  v.sub_cohort_name = require_string(j, "sub_cohort_name");
  v.source_cohort_id = require_string(j, "source_cohort_id");
  RuleAction defaults;
  auto ws = optional_string(j, "window_start");
  v.window_start = ws ? parse_time_of_day(*ws) : defaults.window_start;
  auto we = optional_string(j, "window_end");
  v.window_end = we ? parse_time_of_day(*we) : defaults.window_end;
  v.day_offset = j.value("day_offset", defaults.day_offset);
}

void to_json(Json& j, const Rule& v) {
  j = Json{{"rule_id", v.rule_id},
           {"study_id", v.study_id},
           {"name", v.name},
           {"trigger", v.trigger},
           {"predicate", v.predicate},
           {"action", v.action},
           {"active", v.active},
           {"created_at", format_timestamp(v.created_at)}};
}

void from_json(const Json& j, Rule& v) {
  v.rule_id = require_string(j, "rule_id");
  v.study_id = require_string(j, "study_id");
  v.name = j.value("name", std::string());
  v.trigger = require_field(j, "trigger").get<RuleTrigger>();
  v.predicate = require_field(j, "predicate").get<RulePredicate>();
  v.action = require_field(j, "action").get<RuleAction>();
  v.active = j.value("active", true);
  v.created_at = require_ts(j, "created_at");
}

}  // namespace hg
