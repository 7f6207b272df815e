#include <benchmark/benchmark.h>

#include "hg/analytics/phq8.hpp"
#include "hg/analytics/sts.hpp"
#include "hg/analytics/tug.hpp"
#include "hg/sim/rng.hpp"
#include "hg/sim/synth.hpp"

using namespace hg;

static void BM_ScorePhq8(benchmark::State& state) {
  analytics::Phq8Response r;
  int code = 0;
  for (auto _ : state) {
    for (int i = 0; i < 8; ++i) r.answers[i] = (code >> (2 * i)) & 3;
    benchmark::DoNotOptimize(analytics::score_phq8(r));
    code = (code + 1) & 0xffff;
  }
}
BENCHMARK(BM_ScorePhq8);

static void BM_DetectSteps(benchmark::State& state) {
  sim::Rng rng(3);
  sim::GaitProfile g;
  const auto synth = sim::synth_accel(g, static_cast<double>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(analytics::detect_steps(synth.trace));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(synth.trace.samples.size()));
}
BENCHMARK(BM_DetectSteps)->Arg(30)->Arg(120)->Unit(benchmark::kMicrosecond);

static void BM_ExtractFeatures(benchmark::State& state) {
  sim::Rng rng(5);
  std::vector<double> durations;
  for (int i = 0; i < state.range(0); ++i) durations.push_back(rng.uniform(0.4, 0.7));
  const auto series = analytics::step_series_from_durations(durations);
  for (auto _ : state) benchmark::DoNotOptimize(analytics::extract_features(series));
}
BENCHMARK(BM_ExtractFeatures)->Arg(50)->Arg(500);

static void BM_ForestPredict(benchmark::State& state) {
  std::vector<analytics::TugFeatures> xs;
  std::vector<double> ys;
  sim::Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> d;
    const double base = rng.uniform(0.4, 0.7);
    for (int k = 0; k < 40; ++k) d.push_back(base + rng.normal(0.0, 0.02));
    xs.push_back(analytics::extract_features(analytics::step_series_from_durations(d)));
    ys.push_back(3.0 + 10.0 * base);
  }
  const auto model = analytics::ForestTugModel::train("bench", xs, ys, {}, 1);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(xs[i++ % xs.size()]));
}
BENCHMARK(BM_ForestPredict);

static void BM_AnalyzePose(benchmark::State& state) {
  sim::Rng rng(7);
  sim::StsProfile p;
  p.keypoint_noise_px = 1.0;
  const auto synth = sim::synth_pose(p, static_cast<int>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(analytics::analyze_pose(synth.pose));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(synth.pose.frames.size()));
}
BENCHMARK(BM_AnalyzePose)->Arg(5)->Arg(30)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
