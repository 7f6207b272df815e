#include "hg/analytics/sts.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include "hg/analytics/stats.hpp"
#include "hg/common/error.hpp"
#include "hg/dataprep/dataprep.hpp"

namespace hg::analytics {
namespace {

[[noreturn]] void mismatch(const std::string& why) {
  throw Error(ErrorCode::kSchemaMismatch, "pose2d/v1: " + why);
}

const Keypoint* usable(const PoseFrame& f, const char* name, double min_conf) {
  auto it = f.keypoints.find(name);
  if (it == f.keypoints.end() || it->second.confidence < min_conf) return nullptr;
  return &it->second;
}

std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
  if (window <= 1) return x;
  const std::size_t before = (window - 1) / 2;
  const std::size_t after = window / 2;
  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] + x[i];
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t lo = i >= before ? i - before : 0;
    std::size_t hi = std::min(x.size() - 1, i + after);
    // Near the ends the window shrinks symmetrically to stay centred.
    if (i - lo < before || hi - i < after) {
      const std::size_t half = std::min(i - lo, hi - i);
      lo = i - half;
      hi = i + half;
    }
    out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

}  // namespace

PoseSequence pose_from_csv(std::istream& in, double fps, double x) {
  PoseSequence pose;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::vector<double> v;
    try {
      while (std::getline(row, cell, ',')) {
        std::size_t used = 0;
        v.push_back(std::stod(cell, &used));
        if (used != cell.size() && cell.find_first_not_of(" \t", used) != std::string::npos) {
          throw std::invalid_argument(cell);
        }
      }
    } catch (const std::logic_error&) {
      if (pose.frames.empty() && line_no == 1) continue;  // header
      throw Error(ErrorCode::kValidation, "line " + std::to_string(line_no) + ": not numeric");
    }
    if (v.size() != 3) {
      throw Error(ErrorCode::kValidation,
                  "line " + std::to_string(line_no) + ": expected t,shoulder_y,hip_y");
    }
    if (!pose.frames.empty() && v[0] <= pose.frames.back().t) {
      throw Error(ErrorCode::kValidation,
                  "line " + std::to_string(line_no) + ": timestamps must increase");
    }
    PoseFrame f;
    f.t = v[0];
    f.keypoints["mid_shoulder"] = {x, v[1], 1.0};
    f.keypoints["mid_hip"] = {x, v[2], 1.0};
    pose.frames.push_back(std::move(f));
  }
  if (pose.frames.size() < 2) throw Error(ErrorCode::kValidation, "need at least two rows");
  pose.fps = fps > 0 ? fps : 1.0 / (pose.frames[1].t - pose.frames[0].t);
  return pose;
}

PoseSequence parse_pose_document(const Json& doc) {
  if (!doc.is_object()) mismatch("document must be an object");
  auto schema = doc.find("schema");
  if (schema == doc.end() || *schema != "pose2d/v1") mismatch("schema must be \"pose2d/v1\"");
  auto fps = doc.find("fps");
  if (fps == doc.end() || !fps->is_number() || !(fps->get<double>() > 0) ||
      !std::isfinite(fps->get<double>())) {
    mismatch("'fps' must be a positive number");
  }
  auto frames = doc.find("frames");
  if (frames == doc.end() || !frames->is_array()) mismatch("'frames' must be an array");

  PoseSequence pose;
  pose.fps = fps->get<double>();
  pose.frames.reserve(frames->size());
  for (const auto& f : *frames) {
    if (!f.is_object()) mismatch("frames must be objects");
    auto t = f.find("t");
    if (t == f.end() || !t->is_number() || !std::isfinite(t->get<double>())) {
      mismatch("frame 't' must be a number");
    }
    PoseFrame frame;
    frame.t = t->get<double>();
    if (!pose.frames.empty() && !(frame.t > pose.frames.back().t)) {
      mismatch("frame times must be strictly increasing");
    }
    auto kps = f.find("keypoints");
    if (kps == f.end() || !kps->is_object()) mismatch("frame 'keypoints' must be an object");
    for (const auto& [name, v] : kps->items()) {
      if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
          !v[2].is_number()) {
        mismatch("keypoint '" + name + "' must be [x, y, conf]");
      }
      Keypoint kp{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
      if (!std::isfinite(kp.x) || !std::isfinite(kp.y) || kp.confidence < 0.0 ||
          kp.confidence > 1.0) {
        mismatch("keypoint '" + name + "' out of range");
      }
      frame.keypoints.emplace(name, kp);
    }
    pose.frames.push_back(std::move(frame));
  }
  return pose;
}

Json to_document(const PoseSequence& pose) {
  Json frames = Json::array();
  for (const auto& f : pose.frames) {
    Json kps = Json::object();
    for (const auto& [name, kp] : f.keypoints) kps[name] = {kp.x, kp.y, kp.confidence};
    frames.push_back({{"t", f.t}, {"keypoints", kps}});
  }
  return {{"schema", "pose2d/v1"}, {"fps", pose.fps}, {"frames", frames}};
}

TorsoSignal torso_signal(const PoseSequence& pose, const StsOptions& options) {
  if (pose.frames.empty()) throw Error(ErrorCode::kInsufficientPose, "no frames");
  const std::size_t n = pose.frames.size();
  std::vector<double> t(n), raw(n, 0.0);
  std::vector<bool> missing(n, false);
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = pose.frames[i];
    t[i] = f.t;
    const Keypoint* shoulder = usable(f, "mid_shoulder", options.min_confidence);
    const Keypoint* hip = usable(f, "mid_hip", options.min_confidence);
    if (shoulder && hip) {
      raw[i] = -(shoulder->y + hip->y) / 2.0;
      ++covered;
    } else {
      missing[i] = true;
    }
  }
  if (static_cast<double>(covered) < options.min_coverage * static_cast<double>(n)) {
    throw Error(ErrorCode::kInsufficientPose, "mid_shoulder/mid_hip coverage below threshold");
  }
  const auto filled = dataprep::interpolate_masked(t, raw, missing);
  const auto window = static_cast<std::size_t>(std::ceil(options.smoothing_secs * pose.fps));
  const auto smooth = moving_average(filled, window);

  std::vector<double> sorted = smooth;
  std::sort(sorted.begin(), sorted.end());
  const double lo = percentile(sorted, 5);
  const double hi = percentile(sorted, 95);

  TorsoSignal sig;
  sig.t = t;
  if (hi - lo < 1e-6) {
    sig.degenerate = true;
    sig.height.assign(n, 0.5);
    sig.unsmoothed.assign(n, 0.5);
    return sig;
  }
  const double span = hi - lo;
  sig.height.resize(n);
  sig.unsmoothed.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sig.height[i] = std::clamp((smooth[i] - lo) / span, 0.0, 1.0);
    sig.unsmoothed[i] = std::clamp((filled[i] - lo) / span, 0.0, 1.0);
  }
  return sig;
}

std::string_view to_string(TransitionKind kind) {
  return kind == TransitionKind::kSitToStand ? "sit_to_stand" : "stand_to_sit";
}

std::vector<Transition> detect_transitions(const TorsoSignal& signal,
                                           const StsOptions& options) {
  std::vector<Transition> out;
  if (signal.degenerate || signal.t.size() < 2) return out;
  if (signal.t.back() - signal.t.front() < 2.0) return out;

  enum class State { kUnknown, kSitting, kStanding };
  State state = State::kUnknown;
  std::size_t last_in_band = 0;
  for (std::size_t i = 0; i < signal.height.size(); ++i) {
    const double h = signal.height[i];
    const bool low = h < options.sit_band;
    const bool high = h > options.stand_band;
    auto emit = [&](TransitionKind kind) {
      Transition tr;
      tr.kind = kind;
      tr.start_index = last_in_band;
      tr.end_index = i;
      tr.t_start = signal.t[last_in_band];
      tr.t_end = signal.t[i];
      const double d = tr.duration_secs();
      if (d >= options.min_transition_secs && d <= options.max_transition_secs) {
        tr.hesitation_count = count_hesitations(signal, tr, options);
        out.push_back(tr);
      }
    };
    if (low) {
      if (state == State::kStanding) emit(TransitionKind::kStandToSit);
      state = State::kSitting;
      last_in_band = i;
    } else if (high) {
      if (state == State::kSitting) emit(TransitionKind::kSitToStand);
      state = State::kStanding;
      last_in_band = i;
    }
  }
  return out;
}

int count_hesitations(const TorsoSignal& signal, const Transition& tr,
                      const StsOptions& options) {
  const auto& r = signal.unsmoothed;
  const auto& t = signal.t;
  if (tr.end_index >= r.size() || tr.end_index <= tr.start_index + 1) return 0;
  const double direction = tr.kind == TransitionKind::kSitToStand ? 1.0 : -1.0;

  const std::size_t a = tr.start_index;
  const std::size_t b = tr.end_index;
  std::vector<double> v(b - a + 1);
  for (std::size_t i = a; i <= b; ++i) {
    const std::size_t lo = i > 0 ? i - 1 : i;
    const std::size_t hi = i + 1 < r.size() ? i + 1 : i;
    v[i - a] = direction * (r[hi] - r[lo]) / (t[hi] - t[lo]);
  }
  const double peak = *std::max_element(v.begin(), v.end());
  if (!(peak > 0)) return 0;
  const double threshold = options.stall_fraction * peak;

  int count = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    if (v[i] >= threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] < threshold) ++j;
    // Only runs bracketed by moving frames on both sides count.
    // Each frame stands for one frame period, so a run of k stalled frames
    // plus its two bracketing frames covers k + 2 periods.
    if (i > 0 && j + 1 < v.size()) {
      const double span = t[a + j + 1] - t[a + i - 1];
      const double duration = span * static_cast<double>(j - i + 3) /
                              static_cast<double>(j - i + 2);
      if (duration >= options.min_hesitation_secs - 1e-9) ++count;
    }
    i = j + 1;
  }
  return count;
}

int count_cycles(const std::vector<Transition>& transitions) {
  int cycles = 0;
  bool risen = false;
  for (const auto& tr : transitions) {
    if (tr.kind == TransitionKind::kSitToStand) {
      risen = true;
    } else if (risen) {
      ++cycles;
      risen = false;
    }
  }
  return cycles;
}

TorsoGraph downsample(const TorsoSignal& signal, double fps, double target_hz) {
  TorsoGraph g;
  const auto step = static_cast<std::size_t>(std::max(1.0, std::round(fps / target_hz)));
  for (std::size_t i = 0; i < signal.t.size(); i += step) {
    g.t.push_back(signal.t[i]);
    g.phase.push_back(signal.height[i]);
  }
  return g;
}

StsResult analyze_pose(const PoseSequence& pose, const StsOptions& options,
                       const UpdrsPredictor& updrs) {
  StsResult result;
  const auto sig = torso_signal(pose, options);
  result.transitions = detect_transitions(sig, options);
  result.total_cycles = count_cycles(result.transitions);
  for (const auto& tr : result.transitions) result.total_hesitations += tr.hesitation_count;
  result.torso_graph = downsample(sig, pose.fps, options.graph_hz);
  if (updrs) result.updrs_score = updrs(pose, sig);
  return result;
}

Json sts_result_body(const StsResult& result) {
  Json transitions = Json::array();
  for (const auto& tr : result.transitions) {
    transitions.push_back({{"kind", to_string(tr.kind)},
                           {"t_start", tr.t_start},
                           {"t_end", tr.t_end},
                           {"duration_s", tr.duration_secs()},
                           {"hesitation_count", tr.hesitation_count}});
  }
  Json body = {{"schema", "sts.result/v1"},
               {"schema_version", 1},
               {"worker_kind", "sit_to_stand"},
               {"transitions", transitions},
               {"total_cycles", result.total_cycles},
               {"total_hesitations", result.total_hesitations},
               {"torso_graph", {{"t", result.torso_graph.t}, {"phase", result.torso_graph.phase}}}};
  if (result.updrs_score) body["updrs_score"] = *result.updrs_score;
  return body;
}

}  // namespace hg::analytics
