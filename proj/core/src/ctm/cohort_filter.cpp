#include "hg/ctm/cohort_filter.hpp"

#include "hg/common/error.hpp"
#include "hg/domain/serialize.hpp"

namespace hg::ctm {
namespace {

[[noreturn]] void bad_filter(const std::string& why) {
  throw Error(ErrorCode::kBadFilter, why);
}

FilterOp op_from_string(const std::string& s) {
  if (s == "==" || s == "=") return FilterOp::kEq;
  if (s == "!=") return FilterOp::kNe;
  if (s == "<") return FilterOp::kLt;
  if (s == "<=") return FilterOp::kLe;
  if (s == ">") return FilterOp::kGt;
  if (s == ">=") return FilterOp::kGe;
  bad_filter("unknown filter operator '" + s + "'");
}

}  // namespace

std::string_view to_string(FilterOp op) {
  switch (op) {
    case FilterOp::kEq: return "==";
    case FilterOp::kNe: return "!=";
    case FilterOp::kLt: return "<";
    case FilterOp::kLe: return "<=";
    case FilterOp::kGt: return ">";
    case FilterOp::kGe: return ">=";
  }
  return "==";
}

CohortSelector parse_selector(const Json& j) {
  if (!j.is_object() || j.size() != 1) {
    throw Error(ErrorCode::kValidation, "selector must hold exactly one of explicit or filter");
  }
  CohortSelector out;
  if (j.contains("explicit")) {
    const Json& ids = j["explicit"];
    if (!ids.is_array()) throw Error(ErrorCode::kValidation, "selector.explicit must be a list");
    for (const auto& id : ids) {
      if (!id.is_string()) throw Error(ErrorCode::kValidation, "member ids must be strings");
      out.members.insert(id.get<std::string>());
    }
    return out;
  }
  if (!j.contains("filter")) {
    throw Error(ErrorCode::kValidation, "selector must hold explicit or filter");
  }
  const Json& clauses = j["filter"];
  if (!clauses.is_array()) bad_filter("selector.filter must be a list");
  out.is_filter = true;
  for (const auto& c : clauses) {
    if (!c.is_object() || !c.contains("attr") || !c.contains("op") || !c.contains("value")) {
      bad_filter("filter clauses need attr, op and value");
    }
    if (!c["attr"].is_string() || !c["op"].is_string()) {
      bad_filter("filter attr and op must be strings");
    }
    const Json& v = c["value"];
    if (!v.is_string() && !v.is_number() && !v.is_boolean()) {
      bad_filter("filter value must be a string, number or boolean");
    }
    FilterClause clause{c["attr"].get<std::string>(), op_from_string(c["op"].get<std::string>()),
                        attribute_from_json(v)};
    const bool ordered = clause.op != FilterOp::kEq && clause.op != FilterOp::kNe;
    if (ordered && !std::holds_alternative<double>(clause.value)) {
      bad_filter("operator " + std::string(to_string(clause.op)) + " needs a numeric value");
    }
    out.filter.push_back(std::move(clause));
  }
  return out;
}

Json to_json(const CohortSelector& selector) {
  if (!selector.is_filter) return Json{{"explicit", selector.members}};
  Json clauses = Json::array();
  for (const auto& c : selector.filter) {
    clauses.push_back(
        {{"attr", c.attr}, {"op", to_string(c.op)}, {"value", attribute_to_json(c.value)}});
  }
  return Json{{"filter", std::move(clauses)}};
}

bool matches(const Attributes& attributes, const FilterClause& clause) {
  auto it = attributes.find(clause.attr);
  if (it == attributes.end()) return false;
  const AttributeValue& have = it->second;
  if (have.index() != clause.value.index()) return clause.op == FilterOp::kNe;
  switch (clause.op) {
    case FilterOp::kEq: return have == clause.value;
    case FilterOp::kNe: return have != clause.value;
    default: break;
  }
  const double a = std::get<double>(have);
  const double b = std::get<double>(clause.value);
  switch (clause.op) {
    case FilterOp::kLt: return a < b;
    case FilterOp::kLe: return a <= b;
    case FilterOp::kGt: return a > b;
    case FilterOp::kGe: return a >= b;
    default: return false;
  }
}

std::set<std::string> select_members(const std::vector<Subject>& subjects,
                                     const std::vector<FilterClause>& filter) {
  for (const auto& clause : filter) {
    bool known = false;
    for (const auto& s : subjects) known = known || s.attributes.contains(clause.attr);
    if (!known) bad_filter("no subject carries attribute '" + clause.attr + "'");
  }
  std::set<std::string> out;
  for (const auto& s : subjects) {
    bool all = true;
    for (const auto& clause : filter) all = all && matches(s.attributes, clause);
    if (all) out.insert(s.subject_id);
  }
  return out;
}

}  // namespace hg::ctm
