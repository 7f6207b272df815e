#include <gtest/gtest.h>

#include <cmath>

#include "hg/analytics/sts.hpp"
#include "hg/common/error.hpp"
#include "hg/sim/synth.hpp"

using namespace hg::analytics;
using hg::sim::PlateauSpec;
using hg::sim::Rng;
using hg::sim::StsProfile;

namespace {

StsProfile clean(double rise = 0.0) {
  StsProfile p;
  p.rise_secs = rise;
  return p;
}

PoseSequence transform(PoseSequence pose, double scale, double dx, double dy) {
  for (auto& f : pose.frames) {
    for (auto& [name, kp] : f.keypoints) {
      kp.x = kp.x * scale + dx;
      kp.y = kp.y * scale + dy;
    }
  }
  return pose;
}

}  // namespace

TEST(TorsoSignal, ConstantKeypointsAreDegenerate) {
  PoseSequence pose;
  pose.fps = 30;
  for (int i = 0; i < 120; ++i) {
    pose.frames.push_back({i / 30.0, {{"mid_shoulder", {1, 100, 0.9}}, {"mid_hip", {1, 200, 0.9}}}});
  }
  const auto sig = torso_signal(pose);
  EXPECT_TRUE(sig.degenerate);
  for (double h : sig.height) EXPECT_EQ(h, 0.5);
  EXPECT_TRUE(detect_transitions(sig).empty());
}

TEST(TorsoSignal, SinusoidTracksNormalizedTruth) {
  PoseSequence pose;
  pose.fps = 30;
  const double f = 0.2;
  std::vector<double> truth;
  for (int i = 0; i < 600; ++i) {
    const double t = i / 30.0;
    const double s = std::sin(2 * M_PI * f * t);
    pose.frames.push_back(
        {t, {{"mid_shoulder", {0, 200 - 50 * s, 0.9}}, {"mid_hip", {0, 350 - 50 * s, 0.9}}}});
    truth.push_back(s);
  }
  const auto sig = torso_signal(pose);
  // Truth normalized the same way the analytic would: sine percentiles.
  std::vector<double> sorted = truth;
  std::sort(sorted.begin(), sorted.end());
  auto pct = [&](double q) {
    const double r = q / 100 * (sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(r);
    return sorted[lo] + (sorted[std::min(lo + 1, sorted.size() - 1)] - sorted[lo]) * (r - lo);
  };
  const double lo = pct(5), hi = pct(95);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double expected = std::clamp((truth[i] - lo) / (hi - lo), 0.0, 1.0);
    EXPECT_NEAR(sig.height[i], expected, 0.02) << i;
  }
}

TEST(TorsoSignal, CameraShiftInvariance) {
  Rng rng(1);
  const auto synth = hg::sim::synth_pose(clean(), 3, {}, rng);
  const auto a = torso_signal(synth.pose);
  const auto b = torso_signal(transform(synth.pose, 1.0, 0.0, 100.0));
  ASSERT_EQ(a.height.size(), b.height.size());
  for (std::size_t i = 0; i < a.height.size(); ++i) EXPECT_NEAR(a.height[i], b.height[i], 1e-9);
}

TEST(TorsoSignal, LowCoverageIsInsufficientPose) {
  Rng rng(1);
  auto synth = hg::sim::synth_pose(clean(), 2, {}, rng);
  for (std::size_t i = 0; i < synth.pose.frames.size(); i += 3) {
    synth.pose.frames[i].keypoints["mid_hip"].confidence = 0.1;
  }
  try {
    torso_signal(synth.pose);
    FAIL();
  } catch (const hg::Error& e) {
    EXPECT_EQ(e.code(), hg::ErrorCode::kInsufficientPose);
  }
}

TEST(Transitions, FiveCleanCycles) {
  Rng rng(2);
  const auto synth = hg::sim::synth_pose(clean(), 5, {}, rng);
  const auto r = analyze_pose(synth.pose);
  int up = 0, down = 0;
  for (const auto& tr : r.transitions) {
    (tr.kind == TransitionKind::kSitToStand ? up : down)++;
    EXPECT_EQ(tr.hesitation_count, 0);
    EXPECT_GT(tr.duration_secs(), 0.0);
  }
  EXPECT_EQ(up, 5);
  EXPECT_EQ(down, 5);
  EXPECT_EQ(r.total_cycles, 5);
}

TEST(Transitions, EndStateBracketing) {
  Rng rng(3);
  StsProfile p;
  p.keypoint_noise_px = 0.5;
  p.dropout_rate = 0.02;
  const auto synth = hg::sim::synth_pose(p, 4, rng);
  const auto sig = torso_signal(synth.pose);
  for (const auto& tr : detect_transitions(sig)) {
    const double a = sig.height[tr.start_index], b = sig.height[tr.end_index];
    if (tr.kind == TransitionKind::kSitToStand) {
      EXPECT_LT(a, 0.3);
      EXPECT_GT(b, 0.7);
    } else {
      EXPECT_GT(a, 0.7);
      EXPECT_LT(b, 0.3);
    }
  }
}

TEST(Transitions, FlatAtHalfHasNone) {
  TorsoSignal sig;
  for (int i = 0; i < 300; ++i) {
    sig.t.push_back(i / 30.0);
    sig.height.push_back(0.5);
    sig.unsmoothed.push_back(0.5);
  }
  EXPECT_TRUE(detect_transitions(sig).empty());
}

TEST(Transitions, GeometricInvariance) {
  Rng rng(4);
  const auto synth =
      hg::sim::synth_pose(clean(), 3, {{1, TransitionKind::kSitToStand, 0.5, 0.5}}, rng);
  const auto base = analyze_pose(synth.pose);
  for (auto [s, dx, dy] : {std::tuple{2.0, 0.0, 0.0}, std::tuple{0.5, 30.0, -80.0},
                           std::tuple{1.0, 0.0, 100.0}}) {
    const auto r = analyze_pose(transform(synth.pose, s, dx, dy));
    ASSERT_EQ(r.transitions.size(), base.transitions.size());
    EXPECT_EQ(r.total_hesitations, base.total_hesitations);
    for (std::size_t i = 0; i < r.transitions.size(); ++i) {
      EXPECT_EQ(r.transitions[i].hesitation_count, base.transitions[i].hesitation_count);
    }
  }
}

TEST(Hesitations, MonotoneRiseHasNone) {
  Rng rng(5);
  const auto r = analyze_pose(hg::sim::synth_pose(clean(2.0), 1, {}, rng).pose);
  ASSERT_FALSE(r.transitions.empty());
  EXPECT_EQ(r.total_hesitations, 0);
}

TEST(Hesitations, OneHalfSecondPlateau) {
  Rng rng(6);
  const auto synth =
      hg::sim::synth_pose(clean(), 1, {{0, TransitionKind::kSitToStand, 0.5, 0.5}}, rng);
  ASSERT_EQ(synth.truth.plateaus.size(), 1u);
  const auto r = analyze_pose(synth.pose);
  ASSERT_EQ(r.transitions.size(), 2u);
  EXPECT_EQ(r.transitions[0].hesitation_count, 1);
  EXPECT_EQ(r.transitions[1].hesitation_count, 0);
}

TEST(Hesitations, KWellSeparatedPlateaus) {
  const std::vector<std::vector<double>> at = {{}, {0.5}, {0.42, 0.58}, {0.4, 0.5, 0.6}};
  for (std::size_t k = 0; k < at.size(); ++k) {
    for (double len : {0.2, 0.3, 0.5}) {
      std::vector<PlateauSpec> ps;
      for (double a : at[k]) ps.push_back({0, TransitionKind::kSitToStand, a, len});
      Rng rng(7);
      const auto r = analyze_pose(hg::sim::synth_pose(clean(4.0), 1, ps, rng).pose);
      ASSERT_FALSE(r.transitions.empty());
      EXPECT_EQ(r.transitions[0].hesitation_count, static_cast<int>(k))
          << "k=" << k << " len=" << len;
    }
  }
}

TEST(Hesitations, PlateausOnFallToo) {
  Rng rng(8);
  const auto synth = hg::sim::synth_pose(
      clean(3.0), 2,
      {{0, TransitionKind::kStandToSit, 0.45, 0.3}, {0, TransitionKind::kStandToSit, 0.6, 0.3}},
      rng);
  const auto r = analyze_pose(synth.pose);
  ASSERT_EQ(r.transitions.size(), 4u);
  EXPECT_EQ(r.transitions[1].hesitation_count, 2);
  EXPECT_EQ(r.total_hesitations, 2);
}

TEST(TorsoGraph, PreservesCrossingTimes) {
  Rng rng(9);
  StsProfile p;
  p.keypoint_noise_px = 0.3;
  const auto synth = hg::sim::synth_pose(p, 3, rng);
  const auto sig = torso_signal(synth.pose);
  const auto trs = detect_transitions(sig);
  const auto g = downsample(sig, synth.pose.fps, 10.0);
  const double period = g.t[1] - g.t[0];
  for (const auto& tr : trs) {
    const bool up = tr.kind == TransitionKind::kSitToStand;
    bool found = false;
    for (std::size_t i = 1; i < g.t.size(); ++i) {
      const bool crossed = up ? (g.phase[i - 1] <= 0.7 && g.phase[i] > 0.7)
                              : (g.phase[i - 1] >= 0.3 && g.phase[i] < 0.3);
      if (crossed && std::abs(g.t[i] - tr.t_end) <= period + 1e-9) found = true;
    }
    EXPECT_TRUE(found);
  }
}

TEST(PoseDocument, RoundTrip) {
  Rng rng(10);
  const auto synth = hg::sim::synth_pose(clean(), 1, {}, rng);
  const auto back = parse_pose_document(to_document(synth.pose));
  ASSERT_EQ(back.frames.size(), synth.pose.frames.size());
  EXPECT_EQ(back.frames[5].keypoints.at("mid_hip").y, synth.pose.frames[5].keypoints.at("mid_hip").y);
  auto doc = to_document(synth.pose);
  doc["frames"][1]["t"] = 0.0;
  EXPECT_THROW(parse_pose_document(doc), hg::Error);
}
