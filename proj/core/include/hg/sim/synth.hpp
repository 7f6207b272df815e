#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hg/analytics/phq8.hpp"
#include "hg/analytics/sts.hpp"
#include "hg/analytics/tug.hpp"
#include "hg/sim/rng.hpp"

namespace hg::sim {

struct GaitProfile {
  double cadence_hz = 1.8;
  double step_variability = 0.01;  // std of step interval jitter, seconds
  double preferred_walk_secs = 40.0;
  double noise_sigma = 0.05;       // per-axis white noise, m/s^2
  double impulse_amplitude = 2.5;  // m/s^2 along gravity
  double impulse_width_secs = 0.09;
  double sample_rate_hz = 50.0;
};

struct StsProfile {
  double cycle_period_s = 5.0;
  double plateau_rate = 0.0;  // chance that a transition carries a plateau
  double rise_secs = 0.0;     // 0 derives it from the cycle period
  double keypoint_noise_px = 0.0;
  double dropout_rate = 0.0;
  double fps = 30.0;
};

struct SubjectProfile {
  std::string subject_id;
  double depression_level = 0.0;  // latent, 0..3
  double phq8_sigma = 0.7;
  GaitProfile gait;
  StsProfile sts;
  double compliance_prob = 1.0;
  std::uint64_t seed = 0;
};

// Draws a profile within the documented ranges from a master seed.
SubjectProfile make_profile(std::uint64_t master_seed, std::size_t index, double compliance);

// Assumed relation between gait and a TUG score, used as training labels.
double reference_tug_seconds(const GaitProfile& gait);

struct Phq8Synthesis {
  analytics::Phq8Response response;
  int expected_total = 0;
};

Phq8Synthesis synth_phq8(const SubjectProfile& profile, Rng& rng);

struct AccelSynthesis {
  analytics::AccelerometerTrace trace;
  std::vector<double> step_times;                 // seconds from trace start
  std::vector<std::pair<double, double>> bouts;   // walking intervals
  std::vector<std::size_t> steps_per_bout;
};

inline constexpr double kRestMarginSecs = 1.5;

// One walk of duration_s (>= 5 s) between rest margins.
AccelSynthesis synth_accel(const GaitProfile& gait, double duration_s, Rng& rng);
// Several walks separated by rest_secs of standing still.
AccelSynthesis synth_accel_bouts(const GaitProfile& gait, const std::vector<double>& walk_secs,
                                 double rest_secs, Rng& rng);

struct PlateauSpec {
  int cycle = 0;
  analytics::TransitionKind kind = analytics::TransitionKind::kSitToStand;
  double at_fraction = 0.5;  // of the transition's base duration
  double duration_s = 0.5;
};

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

struct PoseTruth {
  std::vector<Interval> rises;
  std::vector<Interval> falls;
  std::vector<Interval> plateaus;
};

struct PoseSynthesis {
  analytics::PoseSequence pose;
  PoseTruth truth;
};

PoseSynthesis synth_pose(const StsProfile& sts, int cycles, std::vector<PlateauSpec> plateaus,
                         Rng& rng);

// Plateaus drawn from the profile's plateau_rate.
PoseSynthesis synth_pose(const StsProfile& sts, int cycles, Rng& rng);

}  // namespace hg::sim
