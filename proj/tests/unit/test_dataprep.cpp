#include <gtest/gtest.h>

#include <set>

#include "hg/common/error.hpp"
#include "hg/dataprep/dataprep.hpp"
#include "hg/sim/rng.hpp"

using namespace hg::dataprep;

TEST(Pseudonym, DeterministicAndSaltScoped) {
  const std::vector<std::uint8_t> a(32, 1), b(32, 2);
  EXPECT_EQ(pseudonym_for(a, "MRN-001"), pseudonym_for(a, "MRN-001"));
  EXPECT_NE(pseudonym_for(a, "MRN-001"), pseudonym_for(b, "MRN-001"));
  EXPECT_EQ(pseudonym_for(a, "MRN-001").rfind("sub_", 0), 0u);
  EXPECT_EQ(pseudonym_for(a, "MRN-001").size(), 4u + 26u);
}

TEST(Pseudonym, TenThousandIdsAreDistinct) {
  const std::vector<std::uint8_t> salt(32, 7);
  std::set<std::string> seen;
  for (int i = 0; i < 10000; ++i) seen.insert(pseudonym_for(salt, "MRN-" + std::to_string(i)));
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Impute, LinearAndHold) {
  std::vector<TimedValue> s{{0, 1.0}, {2000, 3.0}};
  auto lin = impute_gaps(s, {1.0, ImputePolicy::kLinear, 5.0});
  ASSERT_EQ(lin.size(), 3u);
  EXPECT_EQ(lin[1].t_ms, 1000);
  EXPECT_DOUBLE_EQ(lin[1].value, 2.0);
  EXPECT_TRUE(lin[1].imputed);
  auto hold = impute_gaps(s, {1.0, ImputePolicy::kHold, 5.0});
  EXPECT_DOUBLE_EQ(hold[1].value, 1.0);
  auto drop = impute_gaps(s, {1.0, ImputePolicy::kDrop, 5.0});
  EXPECT_EQ(drop.size(), 2u);
}

TEST(Impute, LongGapSplitsSegment) {
  std::vector<TimedValue> s{{0, 1.0}, {1000, 1.0}, {8000, 2.0}, {9000, 2.0}};
  auto out = impute_gaps(s, {1.0, ImputePolicy::kLinear, 5.0});
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[1].segment, 0);
  EXPECT_EQ(out[2].segment, 1);
  for (const auto& p : out) EXPECT_FALSE(p.imputed);
}

TEST(Impute, ObservedSamplesUntouched) {
  hg::sim::Rng rng(4);
  std::vector<TimedValue> s;
  std::int64_t t = 0;
  for (int i = 0; i < 500; ++i) {
    t += 100 * (1 + static_cast<std::int64_t>(rng.below(rng.bernoulli(0.1) ? 70 : 1)));
    s.push_back({t, rng.normal()});
  }
  auto out = impute_gaps(s, {10.0, ImputePolicy::kLinear, 5.0});
  std::size_t observed = 0;
  for (const auto& p : out) {
    if (!p.imputed) {
      ASSERT_EQ(p.t_ms, s[observed].t_ms);
      ASSERT_EQ(p.value, s[observed].value);
      ++observed;
    }
  }
  EXPECT_EQ(observed, s.size());
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_LT(out[i - 1].t_ms, out[i].t_ms);
}

TEST(Impute, EmptyAndUnordered) {
  try {
    impute_gaps({}, {});
    FAIL();
  } catch (const hg::Error& e) {
    EXPECT_EQ(e.code(), hg::ErrorCode::kEmptyInput);
  }
  std::vector<TimedValue> bad{{1000, 1}, {1000, 2}};
  EXPECT_THROW(impute_gaps(bad, {}), hg::Error);
}

TEST(Synchronize, ShiftsByOffset) {
  Stream a{"watch", {{1000, 1}, {1020, 2}, {1040, 3}}};
  Stream b{"phone", {{900, 1}, {1000, 2}}};
  auto out = synchronize({{a, 120}, {b, 0}});
  EXPECT_EQ(out[0].samples[0].t_ms, 880);
  EXPECT_EQ(out[0].samples[2].t_ms - out[0].samples[1].t_ms, 20);
  EXPECT_EQ(out[1].samples[1].t_ms, 1000);
}

TEST(Synchronize, CommonEventAligns) {
  // The same physical event seen by two clocks skewed by +50 / -50 ms.
  const std::int64_t event = 5'000'000;
  Stream a{"a", {{event + 50, 1.0}}};
  Stream b{"b", {{event - 50, 1.0}}};
  auto out = synchronize({{a, 50}, {b, -50}});
  EXPECT_LE(std::llabs(out[0].samples[0].t_ms - out[1].samples[0].t_ms), 1);
}

TEST(Aggregate, MeanCountAndMixed) {
  std::vector<ScoredDatapoint> pts{{"s", "t", {}, 10.0}, {"s", "t", {}, 12.0}};
  auto a = aggregate(pts);
  EXPECT_EQ(a.count, 2u);
  EXPECT_DOUBLE_EQ(*a.mean, 11.0);
  EXPECT_EQ(aggregate(std::span<const ScoredDatapoint>{}).count, 0u);
  EXPECT_TRUE(to_json(aggregate(std::span<const ScoredDatapoint>{}))["mean"].is_null());
  pts.push_back({"s", "other", {}, 1.0});
  try {
    aggregate(pts);
    FAIL();
  } catch (const hg::Error& e) {
    EXPECT_EQ(e.code(), hg::ErrorCode::kMixedInput);
  }
}

TEST(Aggregate, MeanMatchesBruteForce) {
  hg::sim::Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng.below(300));
    long double sum = 0;
    for (auto& x : v) {
      x = rng.uniform(5.0, 25.0);
      sum += x;
    }
    const double brute = static_cast<double>(sum / v.size());
    EXPECT_NEAR(*aggregate_values(v).mean, brute, 1e-12 * brute);
  }
}
