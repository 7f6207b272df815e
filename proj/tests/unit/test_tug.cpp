#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "hg/analytics/tug.hpp"
#include "hg/common/error.hpp"
#include "hg/sim/synth.hpp"

using namespace hg::analytics;
using hg::sim::GaitProfile;
using hg::sim::Rng;

namespace {

GaitProfile clean_gait(double cadence) {
  GaitProfile g;
  g.cadence_hz = cadence;
  g.step_variability = 0.0;
  g.noise_sigma = 0.0;
  return g;
}

}  // namespace

TEST(DetectSteps, CleanWalkCountsEveryStep) {
  Rng rng(1);
  auto synth = hg::sim::synth_accel(clean_gait(1.8), 60.0, rng);
  ASSERT_EQ(synth.step_times.size(), 108u);
  const auto episodes = detect_steps(synth.trace);
  ASSERT_EQ(episodes.size(), 1u);
  EXPECT_EQ(episodes[0].step_indices.size(), 108u);
  EXPECT_GT(episodes[0].end_index, episodes[0].start_index);
}

TEST(DetectSteps, GravityOnlyHasNoEpisodes) {
  AccelerometerTrace trace;
  trace.sample_rate_hz = 50;
  trace.samples.assign(500, {0.0, 0.0, kGravity});
  EXPECT_TRUE(detect_steps(trace).empty());
}

TEST(DetectSteps, TwoBoutsSeparatedByRest) {
  Rng rng(2);
  auto g = clean_gait(1.7);
  g.noise_sigma = 0.05;
  auto synth = hg::sim::synth_accel_bouts(g, {30.0, 30.0}, 10.0, rng);
  const auto episodes = detect_steps(synth.trace);
  ASSERT_EQ(episodes.size(), 2u);
  for (std::size_t b = 0; b < 2; ++b) {
    EXPECT_EQ(episodes[b].step_indices.size(), synth.steps_per_bout[b]);
  }
}

TEST(DetectSteps, ShortTraceIsEmptyInput) {
  AccelerometerTrace trace;
  trace.sample_rate_hz = 50;
  trace.samples.assign(40, {0.0, 0.0, kGravity});
  try {
    detect_steps(trace);
    FAIL();
  } catch (const hg::Error& e) {
    EXPECT_EQ(e.code(), hg::ErrorCode::kEmptyInput);
  }
}

TEST(DetectSteps, LowRateRejected) {
  AccelerometerTrace trace;
  trace.sample_rate_hz = 10;
  trace.samples.assign(100, {0.0, 0.0, kGravity});
  EXPECT_THROW(detect_steps(trace), hg::Error);
}

TEST(DetectSteps, TimeShiftInvariance) {
  Rng rng(5);
  GaitProfile g;
  g.cadence_hz = 1.9;
  g.step_variability = 0.02;
  g.noise_sigma = 0.05;
  auto synth = hg::sim::synth_accel(g, 40.0, rng);
  const auto base = detect_steps(synth.trace);
  ASSERT_EQ(base.size(), 1u);
  for (double shift : {0.5, 3.0, 12.0}) {
    AccelerometerTrace shifted = synth.trace;
    const auto pad = static_cast<std::size_t>(shift * shifted.sample_rate_hz);
    shifted.samples.insert(shifted.samples.begin(), pad, synth.trace.samples.front());
    const auto eps = detect_steps(shifted);
    ASSERT_EQ(eps.size(), 1u);
    EXPECT_EQ(eps[0].start_index, base[0].start_index + pad);
    EXPECT_EQ(eps[0].step_indices.size(), base[0].step_indices.size());
    const auto fa = extract_features(step_series(base[0], 50.0));
    const auto fb = extract_features(step_series(eps[0], 50.0));
    EXPECT_EQ(fa.values, fb.values);
  }
}

TEST(AccelDocument, RoundTripAndStrictness) {
  Rng rng(3);
  auto synth = hg::sim::synth_accel(clean_gait(1.5), 6.0, rng);
  synth.trace.subject_id = "sub_x";
  synth.trace.device_id = "watch-1";
  auto doc = to_document(synth.trace);
  const auto back = parse_accel_document(doc);
  EXPECT_EQ(back.samples, synth.trace.samples);
  doc.erase("sample_rate_hz");
  try {
    parse_accel_document(doc);
    FAIL();
  } catch (const hg::Error& e) {
    EXPECT_EQ(e.code(), hg::ErrorCode::kSchemaMismatch);
  }
}

TEST(Predict, DefaultLinearModel) {
  auto f = extract_features(step_series_from_durations(std::vector<double>(12, 0.6)));
  const auto model = default_tug_model();
  const auto p = predict_tug(f, *model);
  EXPECT_DOUBLE_EQ(p.tug_seconds, 12.0);
  EXPECT_EQ(p.risk_flags, std::set<RiskFlag>{RiskFlag::kPdElevated});
}

TEST(Predict, RiskThresholdsInclusive) {
  EXPECT_TRUE(risk_flags_for(13.5).count(RiskFlag::kGeneralElevated));
  EXPECT_FALSE(risk_flags_for(13.4).count(RiskFlag::kGeneralElevated));
  EXPECT_TRUE(risk_flags_for(11.5).count(RiskFlag::kPdElevated));
  EXPECT_FALSE(risk_flags_for(11.49).count(RiskFlag::kPdElevated));
  EXPECT_TRUE(risk_flags_for(14.0).count(RiskFlag::kStrokeElevated));
  EXPECT_FALSE(risk_flags_for(13.99).count(RiskFlag::kStrokeElevated));
}

TEST(Predict, MissingModelFile) {
  try {
    load_tug_model("/nonexistent/model.json");
    FAIL();
  } catch (const hg::Error& e) {
    EXPECT_EQ(e.code(), hg::ErrorCode::kModelNotFound);
  }
}

TEST(Predict, ForestRoundTripIsBitIdentical) {
  Rng rng(9);
  std::vector<TugFeatures> xs;
  std::vector<double> ys;
  for (int i = 0; i < 80; ++i) {
    std::vector<double> d(30);
    const double m = rng.uniform(0.4, 0.8);
    for (auto& v : d) v = m + rng.normal(0.0, 0.02);
    xs.push_back(extract_features(step_series_from_durations(d)));
    ys.push_back(3.0 + 10.0 * m);
  }
  hg::analytics::ForestParams params;
  params.trees = 20;
  auto a = ForestTugModel::train("f1", xs, ys, params, 42);
  auto b = ForestTugModel::train("f1", xs, ys, params, 42);
  const auto path = std::filesystem::temp_directory_path() / "hg_forest_test.json";
  save_tug_model(a, path);
  const auto loaded = load_tug_model(path);
  for (const auto& x : xs) {
    const double pa = a.predict(x);
    EXPECT_EQ(pa, b.predict(x));
    EXPECT_EQ(pa, loaded->predict(x));
  }
  std::filesystem::remove(path);
}

TEST(DailySummary, MeanAndCount) {
  TugPrediction a, b;
  a.tug_seconds = 10.0;
  b.tug_seconds = 12.0;
  std::vector<TugPrediction> ps{a, b};
  auto s = daily_summary(ps);
  EXPECT_EQ(s.count, 2u);
  EXPECT_DOUBLE_EQ(*s.mean_tug, 11.0);
  EXPECT_EQ(daily_summary({}).count, 0u);
  EXPECT_FALSE(daily_summary({}).mean_tug.has_value());
}
