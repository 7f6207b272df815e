#pragma once

#include <string>

#include "hg/domain/entities.hpp"

// Canonical JSON form of every entity: snake_case keys, keys sorted, UTC
// timestamps with millisecond precision. This is both the wire format and
// the storage format.
namespace hg {

Json attribute_to_json(const AttributeValue& v);
AttributeValue attribute_from_json(const Json& j);

void to_json(Json& j, const Study& v);
void from_json(const Json& j, Study& v);
void to_json(Json& j, const Subject& v);
void from_json(const Json& j, Subject& v);
void to_json(Json& j, const Cohort& v);
void from_json(const Json& j, Cohort& v);
void to_json(Json& j, const Test& v);
void from_json(const Json& j, Test& v);
void to_json(Json& j, const TestSet& v);
void from_json(const Json& j, TestSet& v);
void to_json(Json& j, const Schedule& v);
void from_json(const Json& j, Schedule& v);
void to_json(Json& j, const Task& v);
void from_json(const Json& j, Task& v);
void to_json(Json& j, const TaskOccurrence& v);
void from_json(const Json& j, TaskOccurrence& v);
void to_json(Json& j, const ObjectRef& v);
void from_json(const Json& j, ObjectRef& v);
void to_json(Json& j, const Payload& v);
void from_json(const Json& j, Payload& v);
void to_json(Json& j, const Datapoint& v);
void from_json(const Json& j, Datapoint& v);
void to_json(Json& j, const Dataset& v);
void from_json(const Json& j, Dataset& v);
void to_json(Json& j, const AnalyticResult& v);
void from_json(const Json& j, AnalyticResult& v);
void to_json(Json& j, const RuleTrigger& v);
void from_json(const Json& j, RuleTrigger& v);
void to_json(Json& j, const RulePredicate& v);
void from_json(const Json& j, RulePredicate& v);
void to_json(Json& j, const RuleAction& v);
void from_json(const Json& j, RuleAction& v);
void to_json(Json& j, const Rule& v);
void from_json(const Json& j, Rule& v);

template <typename T>
std::string canonical(const T& entity) {
  return Json(entity).dump();
}

// Field accessors that turn malformed input into Error(kValidation) naming
// the offending field.
const Json& require_field(const Json& j, const char* key);
std::string require_string(const Json& j, const char* key);
double require_number(const Json& j, const char* key);

}  // namespace hg
