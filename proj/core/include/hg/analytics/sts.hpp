#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hg/domain/entities.hpp"

namespace hg::analytics {

struct Keypoint {
  double x = 0.0;
  double y = 0.0;  // pixels, growing downward
  double confidence = 0.0;
};

struct PoseFrame {
  double t = 0.0;
  std::map<std::string, Keypoint> keypoints;
};

struct PoseSequence {
  double fps = 30.0;
  std::vector<PoseFrame> frames;
};

// Strict `pose2d/v1` parsing; structural problems are SCHEMA_MISMATCH.
PoseSequence parse_pose_document(const Json& doc);
Json to_document(const PoseSequence& pose);

// Builds a two-keypoint pose from CSV rows "t,shoulder_y,hip_y" (an
// optional header line is skipped). fps <= 0 infers it from the first
// interval. Throws VALIDATION on malformed rows.
PoseSequence pose_from_csv(std::istream& in, double fps = 0.0, double x = 320.0);

struct StsOptions {
  double min_confidence = 0.3;
  double min_coverage = 0.8;
  double smoothing_secs = 0.25;
  double sit_band = 0.3;
  double stand_band = 0.7;
  double min_transition_secs = 0.2;
  double max_transition_secs = 10.0;
  double stall_fraction = 0.1;
  double min_hesitation_secs = 0.2;
  double graph_hz = 10.0;
};

struct TorsoSignal {
  std::vector<double> t;
  // Smoothed, normalized elevation (0 sitting, 1 standing); also reported
  // as the torso phase.
  std::vector<double> height;
  // Same normalization without the moving average; velocity is taken here
  // so short stalls survive.
  std::vector<double> unsmoothed;
  bool smoothed = true;
  bool degenerate = false;
};

// Throws INSUFFICIENT_POSE when mid_shoulder/mid_hip coverage is too low.
TorsoSignal torso_signal(const PoseSequence& pose, const StsOptions& options = {});

enum class TransitionKind { kSitToStand, kStandToSit };
std::string_view to_string(TransitionKind kind);

struct Transition {
  TransitionKind kind = TransitionKind::kSitToStand;
  std::size_t start_index = 0;  // last frame inside the origin band
  std::size_t end_index = 0;    // first frame inside the target band
  double t_start = 0.0;
  double t_end = 0.0;
  int hesitation_count = 0;

  double duration_secs() const { return t_end - t_start; }
};

std::vector<Transition> detect_transitions(const TorsoSignal& signal,
                                           const StsOptions& options = {});

int count_hesitations(const TorsoSignal& signal, const Transition& transition,
                      const StsOptions& options = {});

// Complete sit -> stand -> sit cycles.
int count_cycles(const std::vector<Transition>& transitions);

struct TorsoGraph {
  std::vector<double> t;
  std::vector<double> phase;
};

TorsoGraph downsample(const TorsoSignal& signal, double fps, double target_hz);

struct StsResult {
  std::vector<Transition> transitions;
  int total_cycles = 0;
  int total_hesitations = 0;
  TorsoGraph torso_graph;
  std::optional<double> updrs_score;
};

// Optional external motor-score model; returns nullopt when it abstains.
using UpdrsPredictor =
    std::function<std::optional<double>(const PoseSequence&, const TorsoSignal&)>;

StsResult analyze_pose(const PoseSequence& pose, const StsOptions& options = {},
                       const UpdrsPredictor& updrs = {});

// {"schema":"sts.result/v1","transitions":[...],"total_cycles","torso_graph":{...}}
Json sts_result_body(const StsResult& result);

}  // namespace hg::analytics
