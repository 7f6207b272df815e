#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hg/common/time.hpp"
#include "hg/domain/entities.hpp"

namespace hg::store {
class Datastore;
}

namespace hg::dataprep {

// HMAC-based pseudonym: "sub_" + base32 of the first 16 bytes of
// HMAC-SHA256(salt, raw_id).
std::string pseudonym_for(std::span<const std::uint8_t> salt, std::string_view raw_id);

// Looks up the study salt, derives the pseudonym and records it in the vault.
std::string pseudonymize(store::Datastore& store, const std::string& study_id,
                         const std::string& raw_id);

struct TimedValue {
  std::int64_t t_ms = 0;
  double value = 0.0;
};

struct PreparedSample {
  std::int64_t t_ms = 0;
  double value = 0.0;
  bool imputed = false;
  int segment = 0;
};

enum class ImputePolicy { kLinear, kHold, kDrop };

std::string to_string(ImputePolicy policy);
ImputePolicy impute_policy_from_string(std::string_view text);

struct ImputeOptions {
  double sample_rate_hz = 1.0;
  ImputePolicy policy = ImputePolicy::kLinear;
  double max_gap_secs = 5.0;
};

// Fills missing samples relative to the nominal rate. Gaps wider than
// max_gap_secs are left open and start a new segment.
std::vector<PreparedSample> impute_gaps(std::span<const TimedValue> series,
                                        const ImputeOptions& options);

// Replaces masked entries of an evenly indexed series by linear
// interpolation between the nearest unmasked neighbours; ends are held.
// Throws EMPTY_INPUT when every entry is masked.
std::vector<double> interpolate_masked(std::span<const double> t, std::span<const double> values,
                                       const std::vector<bool>& masked);

struct Stream {
  std::string name;
  std::vector<TimedValue> samples;
};

struct StreamWithOffset {
  Stream stream;
  std::int64_t clock_offset_ms = 0;
};

// Shifts each stream by -offset onto the common timeline.
std::vector<Stream> synchronize(std::vector<StreamWithOffset> streams);

struct ScoredDatapoint {
  std::string subject_id;
  std::string test_id;
  Timestamp collected_at;
  double score = 0.0;
};

struct Aggregate {
  std::size_t count = 0;
  std::optional<double> mean;
  std::optional<double> min;
  std::optional<double> max;
};

Aggregate aggregate(std::span<const ScoredDatapoint> points);
Aggregate aggregate_values(std::span<const double> values);
Json to_json(const Aggregate& agg);

}  // namespace hg::dataprep
