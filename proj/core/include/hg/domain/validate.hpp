#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hg/common/ids.hpp"
#include "hg/domain/entities.hpp"

namespace hg {

struct Violation {
  std::string code;  // e.g. CROSS_STUDY_MEMBER
  std::string detail;

  bool operator==(const Violation&) const = default;
};

// Empty means the entity is well formed.
using ValidationOutcome = std::vector<Violation>;

// Resolves the owning study of referenced entities; validators use it for
// the cross-study checks. Returns nullopt for unknown ids.
class StudyLookup {
 public:
  virtual ~StudyLookup() = default;
  virtual std::optional<std::string> study_of(EntityKind kind, const std::string& id) const = 0;
};

ValidationOutcome validate(const Study& v);
ValidationOutcome validate(const Subject& v);
ValidationOutcome validate(const Cohort& v, const StudyLookup& lookup);
ValidationOutcome validate(const Test& v);
ValidationOutcome validate(const TestSet& v);
ValidationOutcome validate(const Schedule& v);
ValidationOutcome validate(const Task& v, const StudyLookup& lookup);
ValidationOutcome validate(const TaskOccurrence& v);
ValidationOutcome validate(const Datapoint& v);
ValidationOutcome validate(const Dataset& v);
ValidationOutcome validate(const AnalyticResult& v);
ValidationOutcome validate(const Rule& v, const StudyLookup& lookup);

// Throws Error(kValidation) listing every violation code when non-empty.
void throw_if_invalid(const ValidationOutcome& outcome, const std::string& what);

// Kind-specific parameter schema with defaults filled in; throws on bad params.
Json normalized_test_params(TestKind kind, const Json& params);

}  // namespace hg
