#include "hg/dataprep/dataprep.hpp"

#include <algorithm>
#include <cmath>

#include "hg/common/crypto.hpp"
#include "hg/common/error.hpp"
#include "hg/store/datastore.hpp"

namespace hg::dataprep {

std::string pseudonym_for(std::span<const std::uint8_t> salt, std::string_view raw_id) {
  const auto mac = crypto::hmac_sha256(salt, raw_id);
  return "sub_" + crypto::base32_lower(std::span<const std::uint8_t>(mac.data(), 16));
}

std::string pseudonymize(store::Datastore& store, const std::string& study_id,
                         const std::string& raw_id) {
  if (auto existing = store.find_pseudonym(study_id, raw_id)) return *existing;
  const auto salt = store.study_salt(study_id);
  return store.insert_pseudonym(study_id, raw_id, pseudonym_for(salt, raw_id));
}

std::string to_string(ImputePolicy policy) {
  switch (policy) {
    case ImputePolicy::kLinear: return "linear";
    case ImputePolicy::kHold: return "hold";
    case ImputePolicy::kDrop: return "drop";
  }
  return "linear";
}

ImputePolicy impute_policy_from_string(std::string_view text) {
  if (text == "linear") return ImputePolicy::kLinear;
  if (text == "hold") return ImputePolicy::kHold;
  if (text == "drop") return ImputePolicy::kDrop;
  throw Error(ErrorCode::kValidation, "unknown imputation policy: " + std::string(text));
}

std::vector<PreparedSample> impute_gaps(std::span<const TimedValue> series,
                                        const ImputeOptions& options) {
  if (series.empty()) throw Error(ErrorCode::kEmptyInput, "series is empty");
  if (!(options.sample_rate_hz > 0)) {
    throw Error(ErrorCode::kValidation, "sample rate must be positive");
  }
  const double period_ms = 1000.0 / options.sample_rate_hz;
  const double gap_threshold_ms = 1.5 * period_ms;
  const double max_gap_ms = options.max_gap_secs * 1000.0;

  std::vector<PreparedSample> out;
  out.reserve(series.size());
  int segment = 0;
  out.push_back({series[0].t_ms, series[0].value, false, segment});
  for (std::size_t i = 1; i < series.size(); ++i) {
    const TimedValue& prev = series[i - 1];
    const TimedValue& cur = series[i];
    if (cur.t_ms <= prev.t_ms) {
      throw Error(ErrorCode::kValidation, "timestamps must be strictly increasing");
    }
    const auto dt = static_cast<double>(cur.t_ms - prev.t_ms);
    if (dt > max_gap_ms) {
      ++segment;
    } else if (dt > gap_threshold_ms && options.policy != ImputePolicy::kDrop) {
      const auto missing = static_cast<long>(std::llround(dt / period_ms)) - 1;
      for (long k = 1; k <= missing; ++k) {
        const auto t = prev.t_ms + std::llround(static_cast<double>(k) * period_ms);
        if (t >= cur.t_ms) break;
        double v = prev.value;
        if (options.policy == ImputePolicy::kLinear) {
          const double frac = static_cast<double>(t - prev.t_ms) / dt;
          v = prev.value + frac * (cur.value - prev.value);
        }
        out.push_back({t, v, true, segment});
      }
    }
    out.push_back({cur.t_ms, cur.value, false, segment});
  }
  return out;
}

std::vector<double> interpolate_masked(std::span<const double> t, std::span<const double> values,
                                       const std::vector<bool>& masked) {
  if (t.size() != values.size() || masked.size() != values.size()) {
    throw Error(ErrorCode::kValidation, "series and mask lengths differ");
  }
  std::vector<std::size_t> known;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!masked[i]) known.push_back(i);
  }
  if (known.empty()) throw Error(ErrorCode::kEmptyInput, "no observed samples");

  std::vector<double> out(values.begin(), values.end());
  for (std::size_t i = 0; i < known.front(); ++i) out[i] = values[known.front()];
  for (std::size_t i = known.back() + 1; i < values.size(); ++i) out[i] = values[known.back()];
  for (std::size_t k = 0; k + 1 < known.size(); ++k) {
    const std::size_t a = known[k];
    const std::size_t b = known[k + 1];
    for (std::size_t i = a + 1; i < b; ++i) {
      const double frac = (t[i] - t[a]) / (t[b] - t[a]);
      out[i] = values[a] + frac * (values[b] - values[a]);
    }
  }
  return out;
}

std::vector<Stream> synchronize(std::vector<StreamWithOffset> streams) {
  std::vector<Stream> out;
  out.reserve(streams.size());
  for (auto& s : streams) {
    for (auto& sample : s.stream.samples) sample.t_ms -= s.clock_offset_ms;
    out.push_back(std::move(s.stream));
  }
  return out;
}

Aggregate aggregate_values(std::span<const double> values) {
  Aggregate agg;
  agg.count = values.size();
  if (values.empty()) return agg;
  // Neumaier summation keeps the mean within rounding of the exact value.
  double sum = 0.0;
  double carry = 0.0;
  double lo = values[0];
  double hi = values[0];
  for (double v : values) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  agg.mean = (sum + carry) / static_cast<double>(values.size());
  agg.min = lo;
  agg.max = hi;
  return agg;
}

Aggregate aggregate(std::span<const ScoredDatapoint> points) {
  std::vector<double> values;
  values.reserve(points.size());
  for (const auto& p : points) {
    if (p.test_id != points.front().test_id) {
      throw Error(ErrorCode::kMixedInput, "datapoints span more than one test");
    }
    if (p.subject_id != points.front().subject_id) {
      throw Error(ErrorCode::kMixedInput, "datapoints span more than one subject");
    }
    values.push_back(p.score);
  }
  return aggregate_values(values);
}

Json to_json(const Aggregate& agg) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"count", agg.count}, {"mean", opt(agg.mean)}, {"min", opt(agg.min)},
              {"max", opt(agg.max)}};
}

}  // namespace hg::dataprep
