#include <gtest/gtest.h>

#include <cmath>

#include "fixture.hpp"
#include "hg/analytics/signal.hpp"
#include "hg/common/error.hpp"

using namespace hg::analytics;

TEST(Bandpass, MatchesReferenceSections) {
  const auto cases = load_fixture("signal_oracle.json")["cases"];
  for (const auto& c : cases) {
    const auto sos = butterworth_bandpass(2, c["low"], c["high"], c["fs"]);
    ASSERT_EQ(sos.size(), c["sos"].size());
    // Section ordering may differ; compare the overall response instead.
    for (double f : {0.2, 0.5, 1.0, 1.8, 3.0, 5.0}) {
      SosFilter ref;
      for (const auto& row : c["sos"]) {
        ref.push_back({row[0], row[1], row[2], row[4], row[5]});
      }
      EXPECT_NEAR(magnitude_response(sos, f, c["fs"]), magnitude_response(ref, f, c["fs"]),
                  1e-9);
    }
  }
}

TEST(Bandpass, UnityNearCentreAndHalfPowerAtEdges) {
  const auto sos = butterworth_bandpass(2, 0.5, 3.0, 50.0);
  const double centre = std::sqrt(
      std::tan(M_PI * 0.5 / 50) * std::tan(M_PI * 3.0 / 50));
  const double f0 = std::atan(centre) * 50 / M_PI;
  EXPECT_NEAR(magnitude_response(sos, f0, 50.0), 1.0, 1e-9);
  EXPECT_NEAR(magnitude_response(sos, 0.5, 50.0), 1.0 / std::sqrt(2.0), 1e-9);
  EXPECT_NEAR(magnitude_response(sos, 3.0, 50.0), 1.0 / std::sqrt(2.0), 1e-9);
}

TEST(Bandpass, RejectsBadDesign) {
  EXPECT_THROW(butterworth_bandpass(2, 3.0, 0.5, 50.0), hg::Error);
  EXPECT_THROW(butterworth_bandpass(2, 0.5, 30.0, 50.0), hg::Error);
}

TEST(Filtfilt, MatchesReference) {
  const auto cases = load_fixture("signal_oracle.json")["cases"];
  for (const auto& c : cases) {
    const auto x = c["x"].get<std::vector<double>>();
    const auto expected = c["filtered"].get<std::vector<double>>();
    const auto y = sos_filtfilt(butterworth_bandpass(2, c["low"], c["high"], c["fs"]), x);
    ASSERT_EQ(y.size(), expected.size());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expected[i], 1e-9) << i;
  }
}

TEST(Filtfilt, TooShortSignalIsEmptyInput) {
  std::vector<double> x(10, 1.0);
  try {
    sos_filtfilt(butterworth_bandpass(2, 0.5, 3.0, 50.0), x);
    FAIL();
  } catch (const hg::Error& e) {
    EXPECT_EQ(e.code(), hg::ErrorCode::kEmptyInput);
  }
}

TEST(FindPeaks, MatchesReference) {
  const auto cases = load_fixture("signal_oracle.json")["cases"];
  for (const auto& c : cases) {
    const auto y = c["filtered"].get<std::vector<double>>();
    PeakOptions opt{c["distance"].get<std::size_t>(), c["prominence"].get<double>(), 0};
    EXPECT_EQ(find_peaks(y, opt), c["peaks"].get<std::vector<std::size_t>>());
    opt.prominence_window = c["wlen"].get<std::size_t>();
    EXPECT_EQ(find_peaks(y, opt), c["peaks_windowed"].get<std::vector<std::size_t>>());
  }
}

TEST(FindPeaks, PlateauResolvesToMiddle) {
  std::vector<double> x{0, 1, 2, 2, 2, 1, 0};
  EXPECT_EQ(find_peaks(x, {}), (std::vector<std::size_t>{3}));
}

TEST(FindPeaks, DistanceKeepsTallest) {
  std::vector<double> x{0, 1, 0, 3, 0, 2, 0};
  EXPECT_EQ(find_peaks(x, {3, 0.0}), (std::vector<std::size_t>{3}));
}

TEST(FindPeaks, ProminenceUsesHigherNeighbourBase) {
  std::vector<double> x{0, 5, 4, 4.5, 4, 6, 0};
  const auto all = find_peaks(x, {});
  ASSERT_EQ(all, (std::vector<std::size_t>{1, 3, 5}));
  const auto prom = peak_prominences(x, all);
  EXPECT_DOUBLE_EQ(prom[0], 1.0);
  EXPECT_DOUBLE_EQ(prom[1], 0.5);
  EXPECT_DOUBLE_EQ(prom[2], 6.0);
  EXPECT_EQ(find_peaks(x, {1, 1.0}), (std::vector<std::size_t>{1, 5}));
  // A narrow window ignores the distant deep base.
  EXPECT_DOUBLE_EQ(peak_prominences(x, all, 3)[1], 0.5);
  EXPECT_DOUBLE_EQ(peak_prominences(x, all, 3)[2], 2.0);
}
