#include "hg/analytics/phq8.hpp"

#include <algorithm>

#include "hg/common/error.hpp"

namespace hg::analytics {
namespace {

[[noreturn]] void mismatch(const std::string& why) {
  throw Error(ErrorCode::kSchemaMismatch, "phq8/v1: " + why);
}

const Json& field(const Json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) mismatch(std::string("missing '") + key + "'");
  return *it;
}

std::string string_field(const Json& doc, const char* key) {
  const Json& v = field(doc, key);
  if (!v.is_string()) mismatch(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

std::string_view to_string(Phq8Category c) {
  switch (c) {
    case Phq8Category::kNone: return "none";
    case Phq8Category::kMild: return "mild";
    case Phq8Category::kModerate: return "moderate";
    case Phq8Category::kModeratelySevere: return "moderately_severe";
    case Phq8Category::kSevere: return "severe";
  }
  return "none";
}

Phq8Category phq8_category(int total_score) {
  if (total_score <= 4) return Phq8Category::kNone;
  if (total_score <= 9) return Phq8Category::kMild;
  if (total_score <= 14) return Phq8Category::kModerate;
  if (total_score <= 19) return Phq8Category::kModeratelySevere;
  return Phq8Category::kSevere;
}

Phq8Result score_phq8(const Phq8Response& response) {
  Phq8Result result;
  for (int i = 0; i < kPhq8Items; ++i) {
    int a = response.answers[static_cast<std::size_t>(i)];
    if (a < 0 || a > kPhq8MaxAnswer) {
      mismatch("answer to question " + std::to_string(i + 1) + " out of range");
    }
    result.total_score += a;
  }
  result.per_item = response.answers;
  result.category = phq8_category(result.total_score);
  return result;
}

Phq8Document parse_phq8_document(const Json& doc) {
  if (!doc.is_object()) mismatch("document must be an object");
  if (string_field(doc, "schema") != "phq8/v1") mismatch("schema must be \"phq8/v1\"");
  Phq8Document out;
  out.subject_id = string_field(doc, "subject_id");
  out.occurrence_id = string_field(doc, "occurrence_id");
  auto ts = try_parse_timestamp(string_field(doc, "completed_at"));
  if (!ts) mismatch("'completed_at' must be an ISO-8601 UTC timestamp");
  out.completed_at = *ts;

  const Json& responses = field(doc, "responses");
  if (!responses.is_array() || responses.size() != kPhq8Items) {
    mismatch("'responses' must hold exactly 8 items");
  }
  int expected_question = 1;
  for (const auto& item : responses) {
    if (!item.is_object()) mismatch("response items must be objects");
    const Json& q = field(item, "question");
    const Json& a = field(item, "answer");
    if (!q.is_number_integer() || q.get<long long>() != expected_question) {
      mismatch("questions must be 1..8 in strictly ascending order");
    }
    if (!a.is_number_integer() || a.get<long long>() < 0 || a.get<long long>() > kPhq8MaxAnswer) {
      mismatch("answer to question " + std::to_string(expected_question) + " must be 0..3");
    }
    out.response.answers[static_cast<std::size_t>(expected_question - 1)] = a.get<int>();
    ++expected_question;
  }
  return out;
}

Json to_document(const Phq8Document& doc) {
  Json responses = Json::array();
  for (int i = 0; i < kPhq8Items; ++i) {
    responses.push_back(
        {{"question", i + 1}, {"answer", doc.response.answers[static_cast<std::size_t>(i)]}});
  }
  return Json{{"schema", "phq8/v1"},
              {"subject_id", doc.subject_id},
              {"occurrence_id", doc.occurrence_id},
              {"completed_at", format_timestamp(doc.completed_at)},
              {"responses", std::move(responses)}};
}

Json to_result_body(const Phq8Result& result) {
  return Json{{"schema", "phq8.result/v1"},
              {"schema_version", 1},
              {"worker_kind", "phq8"},
              {"total_score", result.total_score},
              {"category", to_string(result.category)},
              {"per_item", result.per_item}};
}

std::vector<Phq8SeriesPoint> phq8_series(std::vector<Phq8SeriesPoint> points) {
  std::stable_sort(points.begin(), points.end(),
                   [](const auto& a, const auto& b) { return a.completed_at < b.completed_at; });
  return points;
}

Json to_json(const std::vector<Phq8SeriesPoint>& series, const std::string& subject_id) {
  Json points = Json::array();
  for (const auto& p : series) {
    points.push_back({{"date", format_date(date_of(p.completed_at))},
                      {"completed_at", format_timestamp(p.completed_at)},
                      {"total", p.total_score},
                      {"category", to_string(p.category)}});
  }
  return Json{{"subject_id", subject_id}, {"series", std::move(points)}};
}

const std::array<std::string_view, kPhq8Items>& phq8_item_text() {
  static const std::array<std::string_view, kPhq8Items> kItems{
      "Little interest or pleasure in doing things",
      "Feeling down, depressed, or hopeless",
      "Trouble falling or staying asleep, or sleeping too much",
      "Feeling tired or having little energy",
      "Poor appetite or overeating",
      "Feeling bad about yourself, or that you are a failure or have let yourself or your "
      "family down",
      "Trouble concentrating on things, such as reading the newspaper or watching television",
      "Moving or speaking so slowly that other people could have noticed, or the opposite: "
      "being so fidgety or restless that you have been moving around a lot more than usual",
  };
  return kItems;
}

}  // namespace hg::analytics
