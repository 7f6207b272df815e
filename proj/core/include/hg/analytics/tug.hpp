#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hg/analytics/forest.hpp"
#include "hg/common/time.hpp"
#include "hg/domain/entities.hpp"

namespace hg::analytics {

inline constexpr double kGravity = 9.81;

struct AccelerometerTrace {
  std::string subject_id;
  std::string device_id;
  double sample_rate_hz = 50.0;
  Timestamp start_time;
  std::vector<std::array<double, 3>> samples;

  double duration_secs() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// Strict `accel/v1` parsing; any deviation is SCHEMA_MISMATCH.
AccelerometerTrace parse_accel_document(const Json& doc);
Json to_document(const AccelerometerTrace& trace);

struct StepDetectionOptions {
  double band_low_hz = 0.5;
  double band_high_hz = 3.0;
  int prototype_order = 2;
  double min_prominence = 0.3;  // m/s^2
  double prominence_window_secs = 1.0;
  double min_step_gap_secs = 0.3;
  double episode_gap_secs = 2.0;
  std::size_t min_steps = 10;
  // Peaks at either end of an episode weaker than this fraction of the
  // episode's median prominence are dropped (filter ringing at walk edges).
  double edge_prominence_ratio = 0.5;
};

struct WalkingEpisode {
  std::size_t start_index = 0;
  std::size_t end_index = 0;
  std::vector<std::size_t> step_indices;
  std::vector<double> step_times;  // seconds from trace start
};

// Gravity-removed magnitude after zero-phase band-pass filtering.
std::vector<double> step_signal(const AccelerometerTrace& trace,
                                const StepDetectionOptions& options = {});

std::vector<WalkingEpisode> detect_steps(const AccelerometerTrace& trace,
                                         const StepDetectionOptions& options = {});

struct StepSeries {
  std::vector<double> durations;
  std::vector<double> diffs;
};

// Durations come from integer sample offsets so that shifting a trace
// leaves them bit-identical.
StepSeries step_series(const WalkingEpisode& episode, double sample_rate_hz);
StepSeries step_series_from_durations(std::vector<double> durations);

inline constexpr std::size_t kTugFeatureCount = 20;

struct TugFeatures {
  std::array<double, kTugFeatureCount> values{};

  double get(std::string_view name) const;
  Json to_json() const;
};

// "sd_mean", "sd_std", ..., "diff_iqr": ten statistics over step durations
// then the same ten over their successive differences.
const std::array<std::string, kTugFeatureCount>& tug_feature_names();

TugFeatures extract_features(const StepSeries& series);

enum class RiskFlag { kGeneralElevated, kPdElevated, kStrokeElevated };
std::string_view to_string(RiskFlag flag);
std::set<RiskFlag> risk_flags_for(double tug_seconds);

class TugPredictor {
 public:
  virtual ~TugPredictor() = default;
  virtual const std::string& model_id() const = 0;
  virtual double predict(const TugFeatures& features) const = 0;
  virtual Json to_json() const = 0;
};

// tug = c0 + c1 * sd_mean + c2 * sd_p25 + c3 * sd_p5
class LinearTugModel final : public TugPredictor {
 public:
  LinearTugModel(std::string model_id, std::array<double, 4> coefficients);
  const std::string& model_id() const override { return model_id_; }
  double predict(const TugFeatures& features) const override;
  Json to_json() const override;
  const std::array<double, 4>& coefficients() const { return c_; }

 private:
  std::string model_id_;
  std::array<double, 4> c_;
};

class ForestTugModel final : public TugPredictor {
 public:
  ForestTugModel(std::string model_id, RegressionForest forest, std::uint64_t seed,
                 ForestParams params);
  const std::string& model_id() const override { return model_id_; }
  double predict(const TugFeatures& features) const override;
  Json to_json() const override;

  static ForestTugModel train(std::string model_id, const std::vector<TugFeatures>& features,
                              std::span<const double> tug_seconds, const ForestParams& params,
                              std::uint64_t seed);

 private:
  std::string model_id_;
  RegressionForest forest_;
  std::uint64_t seed_;
  ForestParams params_;
};

std::unique_ptr<TugPredictor> tug_model_from_json(const Json& j);
// Missing or unreadable file is MODEL_NOT_FOUND.
std::unique_ptr<TugPredictor> load_tug_model(const std::filesystem::path& path);
void save_tug_model(const TugPredictor& model, const std::filesystem::path& path);
std::unique_ptr<TugPredictor> default_tug_model();

struct TugPrediction {
  std::string episode_id;
  double tug_seconds = 0.0;
  std::set<RiskFlag> risk_flags;
  std::string model_id;
  TugFeatures features;
  std::size_t step_count = 0;
};

// Throws INTERNAL if the predictor yields a non-positive score.
TugPrediction predict_tug(const TugFeatures& features, const TugPredictor& model,
                          std::string episode_id = "ep0");

// Every episode of the trace with enough steps.
std::vector<TugPrediction> analyze_trace(const AccelerometerTrace& trace,
                                         const TugPredictor& model,
                                         const StepDetectionOptions& options = {});

struct TugDailySummary {
  std::size_t count = 0;
  std::optional<double> mean_tug;
};

TugDailySummary daily_summary(std::span<const TugPrediction> predictions);

// {"schema":"tug.result/v1","predictions":[...],"daily_mean",...}
Json tug_result_body(std::span<const TugPrediction> predictions);

}  // namespace hg::analytics
