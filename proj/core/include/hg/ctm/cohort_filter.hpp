#pragma once

#include <set>
#include <string>
#include <vector>

#include "hg/domain/entities.hpp"

namespace hg::ctm {

enum class FilterOp { kEq, kNe, kLt, kLe, kGt, kGe };

std::string_view to_string(FilterOp op);

// One attribute predicate; a filter is the conjunction of its clauses.
struct FilterClause {
  std::string attr;
  FilterOp op = FilterOp::kEq;
  AttributeValue value;
};

// Cohort selector as sent by clients:
//   {"explicit": ["sub_...", ...]} or
//   {"filter": [{"attr": "age", "op": ">=", "value": 65}, ...]}
struct CohortSelector {
  bool is_filter = false;
  std::set<std::string> members;
  std::vector<FilterClause> filter;
};

// Throws BAD_FILTER for malformed clauses and VALIDATION for a malformed
// selector object.
CohortSelector parse_selector(const Json& j);
Json to_json(const CohortSelector& selector);

// Ordered comparisons apply to numbers only; a subject without the
// attribute, or with a value of another type, never matches.
bool matches(const Attributes& attributes, const FilterClause& clause);

// Subjects satisfying every clause. Throws BAD_FILTER when a clause names an
// attribute that no subject carries.
std::set<std::string> select_members(const std::vector<Subject>& subjects,
                                     const std::vector<FilterClause>& filter);

}  // namespace hg::ctm
