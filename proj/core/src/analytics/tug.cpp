#include "hg/analytics/tug.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hg/analytics/signal.hpp"
#include "hg/analytics/stats.hpp"
#include "hg/common/error.hpp"
#include "hg/dataprep/dataprep.hpp"

namespace hg::analytics {
namespace {

[[noreturn]] void mismatch(const std::string& why) {
  throw Error(ErrorCode::kSchemaMismatch, "accel/v1: " + why);
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

constexpr std::array<std::string_view, 10> kStatNames = {
    "mean", "std", "min", "max", "median", "p5", "p25", "p75", "p95", "iqr"};

std::array<double, 10> summarize(std::span<const double> x) {
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double p25 = percentile(sorted, 25);
  const double p75 = percentile(sorted, 75);
  return {mean(x),           population_std(x),    sorted.front(),       sorted.back(),
          percentile(sorted, 50), percentile(sorted, 5), p25, p75,
          percentile(sorted, 95), p75 - p25};
}

}  // namespace

AccelerometerTrace parse_accel_document(const Json& doc) {
  if (!doc.is_object()) mismatch("document must be an object");
  if (string_field(doc, "schema") != "accel/v1") mismatch("schema must be \"accel/v1\"");
  AccelerometerTrace trace;
  trace.subject_id = string_field(doc, "subject_id");
  trace.device_id = string_field(doc, "device_id");
  const Json& rate = field(doc, "sample_rate_hz");
  if (!rate.is_number() || !(rate.get<double>() > 0) || !std::isfinite(rate.get<double>())) {
    mismatch("'sample_rate_hz' must be a positive number");
  }
  trace.sample_rate_hz = rate.get<double>();
  auto ts = try_parse_timestamp(string_field(doc, "start_time"));
  if (!ts) mismatch("'start_time' must be an ISO-8601 UTC timestamp");
  trace.start_time = *ts;
  if (string_field(doc, "units") != "m/s2") mismatch("'units' must be \"m/s2\"");
  const Json& samples = field(doc, "samples");
  if (!samples.is_array()) mismatch("'samples' must be an array");
  trace.samples.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.is_array() || s.size() != 3) mismatch("each sample must be [ax, ay, az]");
    std::array<double, 3> v{};
    for (std::size_t k = 0; k < 3; ++k) {
      if (!s[k].is_number()) mismatch("sample components must be numbers");
      v[k] = s[k].get<double>();
      if (!std::isfinite(v[k])) mismatch("sample components must be finite");
    }
    trace.samples.push_back(v);
  }
  return trace;
}

Json to_document(const AccelerometerTrace& trace) {
  Json samples = Json::array();
  for (const auto& s : trace.samples) samples.push_back({s[0], s[1], s[2]});
  return {{"schema", "accel/v1"},
          {"subject_id", trace.subject_id},
          {"device_id", trace.device_id},
          {"sample_rate_hz", trace.sample_rate_hz},
          {"start_time", format_timestamp(trace.start_time)},
          {"units", "m/s2"},
          {"samples", std::move(samples)}};
}

std::vector<double> step_signal(const AccelerometerTrace& trace,
                                const StepDetectionOptions& options) {
  if (trace.sample_rate_hz < 20.0) {
    throw Error(ErrorCode::kValidation, "sample rate below 20 Hz");
  }
  if (trace.samples.empty() || trace.duration_secs() < 1.0) {
    throw Error(ErrorCode::kEmptyInput, "trace shorter than 1 s");
  }
  std::vector<double> m;
  m.reserve(trace.samples.size());
  for (const auto& s : trace.samples) {
    m.push_back(std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]) - kGravity);
  }
  const auto sos = butterworth_bandpass(options.prototype_order, options.band_low_hz,
                                        options.band_high_hz, trace.sample_rate_hz);
  return sos_filtfilt(sos, m);
}

std::vector<WalkingEpisode> detect_steps(const AccelerometerTrace& trace,
                                         const StepDetectionOptions& options) {
  const auto filtered = step_signal(trace, options);
  const double rate = trace.sample_rate_hz;
  PeakOptions peak_options;
  peak_options.min_distance =
      static_cast<std::size_t>(std::ceil(options.min_step_gap_secs * rate - 1e-9));
  peak_options.min_prominence = options.min_prominence;
  peak_options.prominence_window =
      static_cast<std::size_t>(std::ceil(options.prominence_window_secs * rate));
  const auto peaks = find_peaks(filtered, peak_options);

  std::vector<WalkingEpisode> episodes;
  std::vector<std::size_t> current;
  auto trim_edges = [&] {
    if (current.size() < 3 || options.edge_prominence_ratio <= 0) return;
    const auto prom = peak_prominences(filtered, current, peak_options.prominence_window);
    std::vector<double> sorted = prom;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double floor = options.edge_prominence_ratio * sorted[sorted.size() / 2];
    std::size_t lo = 0, hi = current.size();
    while (lo < hi && prom[lo] < floor) ++lo;
    while (hi > lo && prom[hi - 1] < floor) --hi;
    current = std::vector<std::size_t>(current.begin() + static_cast<std::ptrdiff_t>(lo),
                                       current.begin() + static_cast<std::ptrdiff_t>(hi));
  };
  auto flush = [&] {
    trim_edges();
    if (current.size() >= options.min_steps) {
      WalkingEpisode ep;
      ep.start_index = current.front();
      ep.end_index = current.back();
      ep.step_indices = current;
      for (auto idx : current) ep.step_times.push_back(static_cast<double>(idx) / rate);
      episodes.push_back(std::move(ep));
    }
    current.clear();
  };
  for (auto p : peaks) {
    if (!current.empty() &&
        static_cast<double>(p - current.back()) / rate >= options.episode_gap_secs) {
      flush();
    }
    current.push_back(p);
  }
  flush();
  return episodes;
}

StepSeries step_series(const WalkingEpisode& episode, double sample_rate_hz) {
  std::vector<double> durations;
  for (std::size_t i = 1; i < episode.step_indices.size(); ++i) {
    durations.push_back(
        static_cast<double>(episode.step_indices[i] - episode.step_indices[i - 1]) /
        sample_rate_hz);
  }
  return step_series_from_durations(std::move(durations));
}

StepSeries step_series_from_durations(std::vector<double> durations) {
  StepSeries s;
  for (std::size_t i = 1; i < durations.size(); ++i) {
    s.diffs.push_back(durations[i] - durations[i - 1]);
  }
  s.durations = std::move(durations);
  return s;
}

const std::array<std::string, kTugFeatureCount>& tug_feature_names() {
  static const auto names = [] {
    std::array<std::string, kTugFeatureCount> out;
    for (std::size_t i = 0; i < kStatNames.size(); ++i) {
      out[i] = "sd_" + std::string(kStatNames[i]);
      out[i + kStatNames.size()] = "diff_" + std::string(kStatNames[i]);
    }
    return out;
  }();
  return names;
}

double TugFeatures::get(std::string_view name) const {
  const auto& names = tug_feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return values[i];
  }
  throw Error(ErrorCode::kValidation, "unknown feature: " + std::string(name));
}

Json TugFeatures::to_json() const {
  Json j = Json::object();
  const auto& names = tug_feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = values[i];
  return j;
}

TugFeatures extract_features(const StepSeries& series) {
  if (series.durations.size() < 2) {
    throw Error(ErrorCode::kInsufficientSteps, "need at least 2 step durations");
  }
  for (double d : series.durations) {
    if (!(d > 0)) throw Error(ErrorCode::kValidation, "step durations must be positive");
  }
  if (series.diffs.size() + 1 != series.durations.size()) {
    throw Error(ErrorCode::kValidation, "diffs must be one shorter than durations");
  }
  TugFeatures f;
  const auto a = summarize(series.durations);
  const auto b = summarize(series.diffs);
  std::copy(a.begin(), a.end(), f.values.begin());
  std::copy(b.begin(), b.end(), f.values.begin() + 10);
  return f;
}

std::string_view to_string(RiskFlag flag) {
  switch (flag) {
    case RiskFlag::kGeneralElevated: return "general_elevated";
    case RiskFlag::kPdElevated: return "pd_elevated";
    case RiskFlag::kStrokeElevated: return "stroke_elevated";
  }
  return "general_elevated";
}

std::set<RiskFlag> risk_flags_for(double tug_seconds) {
  std::set<RiskFlag> flags;
  if (tug_seconds >= 13.5) flags.insert(RiskFlag::kGeneralElevated);
  if (tug_seconds >= 11.5) flags.insert(RiskFlag::kPdElevated);
  if (tug_seconds >= 14.0) flags.insert(RiskFlag::kStrokeElevated);
  return flags;
}

LinearTugModel::LinearTugModel(std::string model_id, std::array<double, 4> coefficients)
    : model_id_(std::move(model_id)), c_(coefficients) {}

double LinearTugModel::predict(const TugFeatures& f) const {
  return c_[0] + c_[1] * f.values[0] + c_[2] * f.values[6] + c_[3] * f.values[5];
}

Json LinearTugModel::to_json() const {
  return {{"model_id", model_id_},
          {"type", "linear"},
          {"parameters", {{"c0", c_[0]}, {"c1", c_[1]}, {"c2", c_[2]}, {"c3", c_[3]}}},
          {"seed", 0}};
}

ForestTugModel::ForestTugModel(std::string model_id, RegressionForest forest,
                               std::uint64_t seed, ForestParams params)
    : model_id_(std::move(model_id)), forest_(std::move(forest)), seed_(seed), params_(params) {
  if (forest_.feature_count() != kTugFeatureCount) {
    throw Error(ErrorCode::kValidation, "forest must consume 20 features");
  }
}

double ForestTugModel::predict(const TugFeatures& f) const { return forest_.predict(f.values); }

Json ForestTugModel::to_json() const {
  Json params = {{"trees", params_.trees},
                 {"max_depth", params_.max_depth},
                 {"min_samples_leaf", params_.min_samples_leaf},
                 {"max_features", params_.max_features},
                 {"features", tug_feature_names()},
                 {"forest", forest_.to_json()}};
  return {{"model_id", model_id_}, {"type", "forest"}, {"parameters", params}, {"seed", seed_}};
}

ForestTugModel ForestTugModel::train(std::string model_id,
                                     const std::vector<TugFeatures>& features,
                                     std::span<const double> tug_seconds,
                                     const ForestParams& params, std::uint64_t seed) {
  std::vector<std::vector<double>> rows;
  rows.reserve(features.size());
  for (const auto& f : features) rows.emplace_back(f.values.begin(), f.values.end());
  return ForestTugModel(std::move(model_id),
                        RegressionForest::fit(rows, tug_seconds, params, seed), seed, params);
}

std::unique_ptr<TugPredictor> tug_model_from_json(const Json& j) {
  try {
    const auto id = j.at("model_id").get<std::string>();
    const auto type = j.at("type").get<std::string>();
    const Json& p = j.at("parameters");
    if (type == "linear") {
      return std::make_unique<LinearTugModel>(
          id, std::array<double, 4>{p.at("c0").get<double>(), p.at("c1").get<double>(),
                                    p.at("c2").get<double>(), p.at("c3").get<double>()});
    }
    if (type == "forest") {
      if (p.contains("features") &&
          p.at("features").get<std::vector<std::string>>() !=
              std::vector<std::string>(tug_feature_names().begin(), tug_feature_names().end())) {
        throw Error(ErrorCode::kValidation, "forest feature order does not match");
      }
      ForestParams params;
      params.trees = p.value("trees", params.trees);
      params.max_depth = p.value("max_depth", params.max_depth);
      params.min_samples_leaf = p.value("min_samples_leaf", params.min_samples_leaf);
      params.max_features = p.value("max_features", params.max_features);
      return std::make_unique<ForestTugModel>(id, RegressionForest::from_json(p.at("forest")),
                                              j.value("seed", std::uint64_t{0}), params);
    }
    throw Error(ErrorCode::kValidation, "unknown model type: " + type);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("malformed model file: ") + e.what());
  }
}

std::unique_ptr<TugPredictor> load_tug_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kModelNotFound, "model file not found: " + path.string());
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kValidation, "model file is not JSON: " + path.string());
  }
  return tug_model_from_json(j);
}

void save_tug_model(const TugPredictor& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kUnavailable, "cannot write model file: " + path.string());
  out << model.to_json().dump(2) << '\n';
}

std::unique_ptr<TugPredictor> default_tug_model() {
  return std::make_unique<LinearTugModel>("tug-linear-default",
                                          std::array<double, 4>{0.0, 20.0, 0.0, 0.0});
}

TugPrediction predict_tug(const TugFeatures& features, const TugPredictor& model,
                          std::string episode_id) {
  TugPrediction p;
  p.episode_id = std::move(episode_id);
  p.tug_seconds = model.predict(features);
  if (!(p.tug_seconds > 0) || !std::isfinite(p.tug_seconds)) {
    throw Error(ErrorCode::kInternal, "model produced a non-positive TUG estimate");
  }
  p.risk_flags = risk_flags_for(p.tug_seconds);
  p.model_id = model.model_id();
  p.features = features;
  return p;
}

std::vector<TugPrediction> analyze_trace(const AccelerometerTrace& trace,
                                         const TugPredictor& model,
                                         const StepDetectionOptions& options) {
  std::vector<TugPrediction> out;
  const auto episodes = detect_steps(trace, options);
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    auto series = step_series(episodes[i], trace.sample_rate_hz);
    auto p = predict_tug(extract_features(series), model, "ep" + std::to_string(i));
    p.step_count = episodes[i].step_indices.size();
    out.push_back(std::move(p));
  }
  return out;
}

TugDailySummary daily_summary(std::span<const TugPrediction> predictions) {
  std::vector<double> scores;
  for (const auto& p : predictions) scores.push_back(p.tug_seconds);
  const auto agg = dataprep::aggregate_values(scores);
  return {agg.count, agg.mean};
}

Json tug_result_body(std::span<const TugPrediction> predictions) {
  Json list = Json::array();
  double max_tug = 0.0;
  for (const auto& p : predictions) {
    Json flags = Json::array();
    for (auto f : p.risk_flags) flags.push_back(to_string(f));
    list.push_back({{"episode", p.episode_id},
                    {"tug_seconds", p.tug_seconds},
                    {"risk_flags", flags},
                    {"model_id", p.model_id},
                    {"step_count", p.step_count},
                    {"features", p.features.to_json()}});
    max_tug = std::max(max_tug, p.tug_seconds);
  }
  const auto summary = daily_summary(predictions);
  return {{"schema", "tug.result/v1"},
          {"schema_version", 1},
          {"worker_kind", "tug"},
          {"predictions", list},
          {"episode_count", summary.count},
          {"daily_mean", summary.mean_tug ? Json(*summary.mean_tug) : Json(nullptr)},
          {"max_tug_seconds", summary.count ? Json(max_tug) : Json(nullptr)}};
}

}  // namespace hg::analytics
