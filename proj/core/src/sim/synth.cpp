#include "hg/sim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hg/common/error.hpp"

namespace hg::sim {
namespace {

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

struct Segment {
  double start = 0.0;
  double base = 0.0;  // duration without plateaus
  std::vector<PlateauSpec> plateaus;
  bool rising = true;

  double total() const {
    double d = base;
    for (const auto& p : plateaus) d += p.duration_s;
    return d;
  }

  // Progress toward standing in [0, 1].
  double progress(double t) const {
    double local = t - start;
    double shift = 0.0;
    for (const auto& p : plateaus) {
      const double at = p.at_fraction * base + shift;
      if (local < at) break;
      if (local < at + p.duration_s) {
        local = at;
        break;
      }
      shift += p.duration_s;
    }
    const double u = smoothstep((local - shift) / base);
    return rising ? u : 1.0 - u;
  }
};

// Torso pixel geometry, sitting and standing.
constexpr double kSitShoulder = 260.0, kSitHip = 420.0;
constexpr double kStandShoulder = 140.0, kStandHip = 300.0;

}  // namespace

SubjectProfile make_profile(std::uint64_t master_seed, std::size_t index, double compliance) {
  SubjectProfile p;
  p.seed = derive_seed(master_seed, index);
  Rng rng(p.seed);
  p.subject_id = "sim-" + std::to_string(index);
  p.depression_level = rng.uniform(0.0, 3.0);
  p.gait.cadence_hz = rng.uniform(1.4, 2.2);
  p.gait.step_variability = rng.uniform(0.0, 0.03);
  p.gait.preferred_walk_secs = rng.uniform(30.0, 60.0);
  p.gait.noise_sigma = rng.uniform(0.0, 0.1);
  p.sts.cycle_period_s = rng.uniform(4.0, 7.0);
  p.sts.plateau_rate = rng.uniform(0.0, 0.4);
  p.sts.keypoint_noise_px = 0.2;
  p.sts.dropout_rate = 0.01;
  p.compliance_prob = compliance;
  return p;
}

double reference_tug_seconds(const GaitProfile& gait) {
  return 3.0 + 10.0 / gait.cadence_hz + 60.0 * gait.step_variability;
}

Phq8Synthesis synth_phq8(const SubjectProfile& profile, Rng& rng) {
  Phq8Synthesis out;
  for (auto& a : out.response.answers) {
    const double draw = profile.phq8_sigma > 0
                            ? rng.normal(profile.depression_level, profile.phq8_sigma)
                            : profile.depression_level;
    a = static_cast<int>(std::clamp(std::round(draw), 0.0, 3.0));
    out.expected_total += a;
  }
  return out;
}

AccelSynthesis synth_accel(const GaitProfile& gait, double duration_s, Rng& rng) {
  return synth_accel_bouts(gait, {duration_s}, 0.0, rng);
}

AccelSynthesis synth_accel_bouts(const GaitProfile& gait, const std::vector<double>& walk_secs,
                                 double rest_secs, Rng& rng) {
  if (walk_secs.empty()) throw Error(ErrorCode::kValidation, "at least one walk required");
  for (double w : walk_secs) {
    if (!(w >= 5.0)) throw Error(ErrorCode::kValidation, "walk duration must be >= 5 s");
  }
  if (!(gait.cadence_hz > 0) || !(gait.sample_rate_hz > 0)) {
    throw Error(ErrorCode::kValidation, "cadence and sample rate must be positive");
  }
  AccelSynthesis out;
  const double period = 1.0 / gait.cadence_hz;
  double cursor = kRestMarginSecs;
  for (std::size_t b = 0; b < walk_secs.size(); ++b) {
    const auto steps =
        static_cast<std::size_t>(std::floor(walk_secs[b] * gait.cadence_hz + 1e-9));
    double t = cursor + 0.5 * period;
    for (std::size_t k = 0; k < steps; ++k) {
      out.step_times.push_back(t);
      double interval = period;
      if (gait.step_variability > 0) interval += rng.normal(0.0, gait.step_variability);
      t += std::max(interval, 0.32);
    }
    const double end = out.step_times.back() + 0.5 * period;
    out.bouts.emplace_back(cursor, end);
    out.steps_per_bout.push_back(steps);
    cursor = end + (b + 1 < walk_secs.size() ? rest_secs : 0.0);
  }
  const double total = cursor + kRestMarginSecs;

  auto& trace = out.trace;
  trace.sample_rate_hz = gait.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::ceil(total * gait.sample_rate_hz));
  trace.samples.resize(n);

  const double tilt = rng.uniform(0.0, 0.6);
  const double ux = std::sin(tilt), uz = std::cos(tilt);
  const double sway = rng.uniform(0.3, 1.0);
  const double w = gait.impulse_width_secs;
  const auto reach = static_cast<long>(std::ceil(5.0 * w * gait.sample_rate_hz));

  std::vector<double> vertical(n, 0.0);
  for (double st : out.step_times) {
    const auto centre = static_cast<long>(std::llround(st * gait.sample_rate_hz));
    for (long i = std::max(0L, centre - reach);
         i <= std::min(static_cast<long>(n) - 1, centre + reach); ++i) {
      const double dt = static_cast<double>(i) / gait.sample_rate_hz - st;
      vertical[static_cast<std::size_t>(i)] +=
          gait.impulse_amplitude * std::exp(-0.5 * dt * dt / (w * w));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / gait.sample_rate_hz;
    double swing = 0.0;
    for (const auto& [s, e] : out.bouts) {
      if (t >= s && t <= e) swing = sway * std::sin(std::numbers::pi * gait.cadence_hz * (t - s));
    }
    const double g = analytics::kGravity + vertical[i];
    auto noise = [&] { return gait.noise_sigma > 0 ? rng.normal(0.0, gait.noise_sigma) : 0.0; };
    trace.samples[i] = {g * ux + noise(), swing + noise(), g * uz + noise()};
  }
  return out;
}

PoseSynthesis synth_pose(const StsProfile& sts, int cycles, std::vector<PlateauSpec> plateaus,
                         Rng& rng) {
  if (cycles < 1) throw Error(ErrorCode::kValidation, "cycles must be >= 1");
  if (!(sts.fps > 0) || !(sts.cycle_period_s > 0)) {
    throw Error(ErrorCode::kValidation, "fps and cycle period must be positive");
  }
  const double move = sts.rise_secs > 0 ? sts.rise_secs : 0.3 * sts.cycle_period_s;
  const double hold = 0.2 * sts.cycle_period_s;

  PoseSynthesis out;
  std::vector<Segment> segments;
  double cursor = 1.5;
  for (int c = 0; c < cycles; ++c) {
    for (bool rising : {true, false}) {
      Segment seg;
      seg.start = cursor;
      seg.base = move;
      seg.rising = rising;
      const auto kind = rising ? analytics::TransitionKind::kSitToStand
                               : analytics::TransitionKind::kStandToSit;
      for (const auto& p : plateaus) {
        if (p.cycle == c && p.kind == kind) seg.plateaus.push_back(p);
      }
      std::sort(seg.plateaus.begin(), seg.plateaus.end(),
                [](const PlateauSpec& a, const PlateauSpec& b) {
                  return a.at_fraction < b.at_fraction;
                });
      double shift = 0.0;
      for (const auto& p : seg.plateaus) {
        const double at = seg.start + p.at_fraction * move + shift;
        out.truth.plateaus.push_back({at, at + p.duration_s});
        shift += p.duration_s;
      }
      const Interval span{seg.start, seg.start + seg.total()};
      (rising ? out.truth.rises : out.truth.falls).push_back(span);
      cursor = span.end + hold;
      segments.push_back(std::move(seg));
    }
  }
  const double total = cursor + 1.0;

  auto& pose = out.pose;
  pose.fps = sts.fps;
  const auto n = static_cast<std::size_t>(std::ceil(total * sts.fps));
  std::size_t seg_index = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sts.fps;
    while (seg_index + 1 < segments.size() && t >= segments[seg_index + 1].start) ++seg_index;
    const Segment& seg = segments[seg_index];
    double e = 0.0;
    if (t < seg.start) {
      e = seg.rising ? 0.0 : 1.0;
    } else if (t >= seg.start + seg.total()) {
      e = seg.rising ? 1.0 : 0.0;
    } else {
      e = seg.progress(t);
    }
    auto jitter = [&] {
      return sts.keypoint_noise_px > 0 ? rng.normal(0.0, sts.keypoint_noise_px) : 0.0;
    };
    const double conf = sts.dropout_rate > 0 && rng.bernoulli(sts.dropout_rate)
                            ? 0.1
                            : (sts.keypoint_noise_px > 0 ? rng.uniform(0.7, 1.0) : 0.95);
    analytics::PoseFrame frame;
    frame.t = t;
    frame.keypoints["mid_shoulder"] = {320.0 + jitter(),
                                       kSitShoulder + (kStandShoulder - kSitShoulder) * e +
                                           jitter(),
                                       conf};
    frame.keypoints["mid_hip"] = {322.0 + jitter(),
                                  kSitHip + (kStandHip - kSitHip) * e + jitter(), conf};
    pose.frames.push_back(std::move(frame));
  }
  return out;
}

PoseSynthesis synth_pose(const StsProfile& sts, int cycles, Rng& rng) {
  std::vector<PlateauSpec> plateaus;
  for (int c = 0; c < cycles; ++c) {
    for (auto kind : {analytics::TransitionKind::kSitToStand,
                      analytics::TransitionKind::kStandToSit}) {
      if (sts.plateau_rate > 0 && rng.bernoulli(sts.plateau_rate)) {
        plateaus.push_back({c, kind, rng.uniform(0.4, 0.6), rng.uniform(0.3, 0.6)});
      }
    }
  }
  return synth_pose(sts, cycles, std::move(plateaus), rng);
}

}  // namespace hg::sim
