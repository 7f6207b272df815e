#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "hg/common/time.hpp"
#include "hg/domain/entities.hpp"

namespace hg::analytics {

inline constexpr int kPhq8Items = 8;
inline constexpr int kPhq8MaxAnswer = 3;

// Answers to items 1..8 in question order, each 0 ("not at all") .. 3
// ("nearly every day").
struct Phq8Response {
  std::array<int, kPhq8Items> answers{};
};

enum class Phq8Category { kNone, kMild, kModerate, kModeratelySevere, kSevere };

std::string_view to_string(Phq8Category c);

struct Phq8Result {
  int total_score = 0;
  Phq8Category category = Phq8Category::kNone;
  std::array<int, kPhq8Items> per_item{};
};

// Parsed `phq8/v1` upload.
struct Phq8Document {
  std::string subject_id;
  std::string occurrence_id;
  Timestamp completed_at;
  Phq8Response response;
};

// Severity band of a total score: 0-4 none, 5-9 mild, 10-14 moderate,
// 15-19 moderately severe, 20-24 severe.
Phq8Category phq8_category(int total_score);

// Throws SCHEMA_MISMATCH on an out-of-range answer.
Phq8Result score_phq8(const Phq8Response& response);

Phq8Document parse_phq8_document(const Json& doc);
Json to_document(const Phq8Document& doc);

// {"schema":"phq8.result/v1","total_score","category","per_item":[...]}
Json to_result_body(const Phq8Result& result);

struct Phq8SeriesPoint {
  Timestamp completed_at;
  int total_score = 0;
  Phq8Category category = Phq8Category::kNone;
};

// Ascending by completed_at; same-day completions are all kept.
std::vector<Phq8SeriesPoint> phq8_series(std::vector<Phq8SeriesPoint> points);
Json to_json(const std::vector<Phq8SeriesPoint>& series, const std::string& subject_id);

// Item wording for UI rendering; scoring depends only on the item index.
const std::array<std::string_view, kPhq8Items>& phq8_item_text();

}  // namespace hg::analytics
