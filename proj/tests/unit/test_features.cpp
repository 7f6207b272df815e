#include <gtest/gtest.h>

#include <cmath>

#include "fixture.hpp"
#include "hg/analytics/tug.hpp"
#include "hg/common/error.hpp"
#include "hg/sim/rng.hpp"

using namespace hg::analytics;

namespace {

// Relative to the value, or to the series scale for statistics that cancel
// to ~0 (means and medians of successive differences).
bool close_rel(double a, double b, double rel, double scale) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), scale});
}

}  // namespace

TEST(Features, MatchNumpyReference) {
  const auto series = load_fixture("feature_oracle.json")["series"];
  ASSERT_EQ(series.size(), 1000u);
  const auto& names = tug_feature_names();
  for (const auto& s : series) {
    const auto f = extract_features(step_series_from_durations(s["durations"]));
    const double scale = s["features"]["sd_mean"];
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double expected = s["features"][names[i]];
      ASSERT_TRUE(close_rel(f.values[i], expected, 1e-9, scale))
          << names[i] << " " << f.values[i] << " vs " << expected;
    }
  }
}

TEST(Features, ConstantSeries) {
  const auto f = extract_features(step_series_from_durations(std::vector<double>(20, 0.5)));
  for (const char* n : {"sd_mean", "sd_min", "sd_max", "sd_median", "sd_p5", "sd_p25",
                        "sd_p75", "sd_p95"}) {
    EXPECT_DOUBLE_EQ(f.get(n), 0.5) << n;
  }
  EXPECT_DOUBLE_EQ(f.get("sd_std"), 0.0);
  EXPECT_DOUBLE_EQ(f.get("sd_iqr"), 0.0);
  for (std::size_t i = 10; i < 20; ++i) EXPECT_DOUBLE_EQ(f.values[i], 0.0);
}

TEST(Features, ThreeDurations) {
  const auto f = extract_features(step_series_from_durations({0.4, 0.5, 0.6}));
  EXPECT_NEAR(f.get("sd_mean"), 0.5, 1e-15);
  EXPECT_NEAR(f.get("sd_p25"), 0.45, 1e-15);
}

TEST(Features, PositiveHomogeneity) {
  hg::sim::Rng rng(3);
  std::vector<double> d, d2;
  for (int i = 0; i < 50; ++i) {
    d.push_back(rng.uniform(0.3, 0.9));
    d2.push_back(2.0 * d.back());
  }
  const auto a = extract_features(step_series_from_durations(d));
  const auto b = extract_features(step_series_from_durations(d2));
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(b.values[i], 2.0 * a.values[i], 1e-12);
}

TEST(Features, OrderingInvariantOnRandomInputs) {
  hg::sim::Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> d(2 + rng.below(100));
    for (auto& v : d) v = rng.uniform(0.05, 2.0);
    const auto f = extract_features(step_series_from_durations(d));
    for (std::size_t base : {0u, 10u}) {
      const double mn = f.values[base + 2], mx = f.values[base + 3], med = f.values[base + 4],
                   p5 = f.values[base + 5], p25 = f.values[base + 6], p75 = f.values[base + 7],
                   p95 = f.values[base + 8];
      EXPECT_TRUE(mn <= p5 && p5 <= p25 && p25 <= med && med <= p75 && p75 <= p95 && p95 <= mx);
    }
  }
}

TEST(Features, TooFewDurations) {
  try {
    extract_features(step_series_from_durations({0.5}));
    FAIL();
  } catch (const hg::Error& e) {
    EXPECT_EQ(e.code(), hg::ErrorCode::kInsufficientSteps);
  }
}
