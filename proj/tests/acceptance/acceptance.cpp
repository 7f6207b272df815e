// Acceptance checks. Prints one PASS/FAIL line per criterion; exits
// non-zero if any selected check fails.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include "hg/analytics/phq8.hpp"
#include "hg/analytics/sts.hpp"
#include "hg/analytics/tug.hpp"
#include "hg/common/error.hpp"
#include "hg/net/http_client.hpp"
#include "hg/sim/fleet.hpp"
#include "hg/sim/rng.hpp"
#include "hg/sim/synth.hpp"
#include "hg/worker/worker.hpp"
#include "support/live_server.hpp"
#include "support/process.hpp"

using namespace hg;
using Wall = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Wall::time_point t0) {
  return std::chrono::duration<double>(Wall::now() - t0).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << std::fixed << v;
  return s.str();
}

// ---------------------------------------------------------------- PHQ-8

std::string band_of(int total) {
  if (total < 5) return "none";
  if (total < 10) return "mild";
  if (total < 15) return "moderate";
  if (total < 20) return "moderately_severe";
  return "severe";
}

Outcome phq8_exhaustive() {
  const auto t0 = Wall::now();
  int mismatches = 0;
  int scored = 0;
  for (int code = 0; code < (1 << 16); ++code) {
    analytics::Phq8Response r;
    int total = 0;
    for (int i = 0; i < 8; ++i) {
      r.answers[i] = (code >> (2 * i)) & 3;
      total += r.answers[i];
    }
    const auto got = analytics::score_phq8(r);
    ++scored;
    if (got.total_score != total || analytics::to_string(got.category) != band_of(total) ||
        got.per_item != r.answers) {
      ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {scored == 65536 && mismatches == 0 && secs < 5.0,
          std::to_string(scored) + " vectors, " + std::to_string(mismatches) + " mismatches, " +
              fmt(secs) + " s (limit 5 s)"};
}

// ---------------------------------------------------------------- steps

Outcome step_detection() {
  double worst_count = 0.0;
  double worst_duration_ms = 0.0;
  int failures = 0;
  for (int i = 0; i < 100; ++i) {
    sim::Rng rng(sim::derive_seed(20240101, static_cast<std::uint64_t>(i)));
    sim::GaitProfile g;
    g.cadence_hz = rng.uniform(1.4, 2.2);
    g.step_variability = rng.uniform(0.0, 0.02);
    g.noise_sigma = 0.3 * (i % 10) / 9.0;  // swept 0 .. 0.3 m/s^2
    const double duration = rng.uniform(30.0, 120.0);
    const auto synth = sim::synth_accel(g, duration, rng);

    std::size_t detected = 0;
    std::vector<double> durations;
    for (const auto& ep : analytics::detect_steps(synth.trace)) {
      detected += ep.step_indices.size();
      const auto s = analytics::step_series(ep, synth.trace.sample_rate_hz);
      durations.insert(durations.end(), s.durations.begin(), s.durations.end());
    }
    const double truth = static_cast<double>(synth.step_times.size());
    const double count_err = std::abs(static_cast<double>(detected) - truth) / truth;
    double truth_mean = (synth.step_times.back() - synth.step_times.front()) / (truth - 1.0);
    double got_mean = durations.empty()
                          ? 0.0
                          : std::accumulate(durations.begin(), durations.end(), 0.0) /
                                static_cast<double>(durations.size());
    const double dur_err_ms = std::abs(got_mean - truth_mean) * 1000.0;
    worst_count = std::max(worst_count, count_err);
    worst_duration_ms = std::max(worst_duration_ms, dur_err_ms);
    if (count_err > 0.02 || dur_err_ms > 5.0) ++failures;
  }
  return {failures == 0, "100 gaits, worst step-count error " + fmt(100 * worst_count, 2) +
                             "% (limit 2%), worst mean-duration error " +
                             fmt(worst_duration_ms, 2) + " ms (limit 5 ms), " +
                             std::to_string(failures) + " failing"};
}

// ---------------------------------------------------------------- features

Json load_fixture(const std::string& name) {
  std::ifstream in(std::string(HG_FIXTURE_DIR) + "/" + name);
  if (!in) throw std::runtime_error("missing fixture " + name);
  return Json::parse(in);
}

Outcome feature_correctness() {
  const auto series = load_fixture("feature_oracle.json")["series"];
  const auto& names = analytics::tug_feature_names();
  double worst = 0.0;
  int value_failures = 0;
  int order_failures = 0;
  for (const auto& s : series) {
    const auto f = analytics::extract_features(
        analytics::step_series_from_durations(s["durations"].get<std::vector<double>>()));
    // Statistics that cancel to ~0 are compared relative to the series scale.
    const double scale = s["features"]["sd_mean"];
    for (std::size_t i = 0; i < names.size(); ++i) {
      const double want = s["features"][names[i]];
      const double denom = std::max({std::abs(want), std::abs(f.values[i]), scale});
      const double rel = std::abs(f.values[i] - want) / denom;
      worst = std::max(worst, rel);
      if (rel > 1e-9) ++value_failures;
    }
    for (const char* group : {"sd_", "diff_"}) {
      std::vector<double> chain;
      for (const char* stat : {"min", "p5", "p25", "median", "p75", "p95", "max"}) {
        chain.push_back(f.get(std::string(group) + stat));
      }
      if (!std::is_sorted(chain.begin(), chain.end())) ++order_failures;
    }
  }
  return {series.size() == 1000 && value_failures == 0 && order_failures == 0,
          std::to_string(series.size()) + " series, worst relative error " + [&] {
            std::ostringstream o;
            o << std::scientific << worst;
            return o.str();
          }() + " (limit 1e-9), " + std::to_string(order_failures) + " ordering violations"};
}

// ---------------------------------------------------------------- forest

struct Episode {
  analytics::TugFeatures features;
  double label = 0.0;
};

std::vector<Episode> tug_episodes(int n, std::uint64_t seed) {
  std::vector<Episode> out;
  for (int i = 0; out.size() < static_cast<std::size_t>(n); ++i) {
    sim::Rng rng(sim::derive_seed(seed, static_cast<std::uint64_t>(i)));
    sim::GaitProfile g;
    g.cadence_hz = rng.uniform(1.4, 2.2);
    g.step_variability = rng.uniform(0.0, 0.04);
    g.noise_sigma = rng.uniform(0.02, 0.1);
    const auto synth = sim::synth_accel(g, rng.uniform(30.0, 60.0), rng);
    const auto episodes = analytics::detect_steps(synth.trace);
    if (episodes.empty()) continue;
    out.push_back({analytics::extract_features(
                       analytics::step_series(episodes.front(), synth.trace.sample_rate_hz)),
                   sim::reference_tug_seconds(g)});
  }
  return out;
}

Outcome forest_mae() {
  const auto episodes = tug_episodes(500, 77);
  const std::size_t n_train = 400;
  std::vector<analytics::TugFeatures> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < n_train; ++i) {
    xs.push_back(episodes[i].features);
    ys.push_back(episodes[i].label);
  }
  analytics::ForestParams params;
  const auto a = analytics::ForestTugModel::train("forest-acceptance", xs, ys, params, 11);
  const auto b = analytics::ForestTugModel::train("forest-acceptance", xs, ys, params, 11);
  double abs_err = 0.0;
  bool deterministic = true;
  for (std::size_t i = n_train; i < episodes.size(); ++i) {
    const double p = a.predict(episodes[i].features);
    deterministic = deterministic && p == b.predict(episodes[i].features);
    abs_err += std::abs(p - episodes[i].label);
  }
  const double mae = abs_err / static_cast<double>(episodes.size() - n_train);
  return {mae <= 1.7 && deterministic,
          "500 episodes (400 train / 100 held out), MAE " + fmt(mae) + " s (limit 1.7 s), " +
              (deterministic ? "deterministic" : "NOT deterministic") + " under seed"};
}

// ---------------------------------------------------------------- sit-to-stand

analytics::PoseSequence transform(analytics::PoseSequence pose, double s, double dx, double dy) {
  for (auto& f : pose.frames) {
    for (auto& [name, kp] : f.keypoints) {
      kp.x = kp.x * s + dx;
      kp.y = kp.y * s + dy;
    }
  }
  return pose;
}

bool same_counts(const analytics::StsResult& a, const analytics::StsResult& b) {
  if (a.transitions.size() != b.transitions.size() || a.total_cycles != b.total_cycles ||
      a.total_hesitations != b.total_hesitations) {
    return false;
  }
  for (std::size_t i = 0; i < a.transitions.size(); ++i) {
    if (a.transitions[i].kind != b.transitions[i].kind ||
        a.transitions[i].hesitation_count != b.transitions[i].hesitation_count) {
      return false;
    }
  }
  return true;
}

Outcome sts_oracle() {
  using analytics::TransitionKind;
  const std::vector<std::vector<double>> at = {{}, {0.5}, {0.42, 0.58}, {0.4, 0.5, 0.6}};
  int cases = 0, cycle_failures = 0, plateau_failures = 0, invariance_failures = 0;
  for (int seed = 0; seed < 10; ++seed) {
    for (std::size_t k = 0; k < at.size(); ++k) {
      sim::Rng rng(sim::derive_seed(515, static_cast<std::uint64_t>(seed * 4 + k)));
      sim::StsProfile p;
      p.rise_secs = 4.0;
      p.cycle_period_s = 14.0;
      const int cycle = static_cast<int>(rng.below(5));
      const auto kind = rng.bernoulli(0.5) ? TransitionKind::kSitToStand
                                           : TransitionKind::kStandToSit;
      const double len = std::array{0.2, 0.3, 0.5}[rng.below(3)];
      std::vector<sim::PlateauSpec> ps;
      for (double a : at[k]) ps.push_back({cycle, kind, a, len});
      const auto synth = sim::synth_pose(p, 5, ps, rng);
      const auto r = analytics::analyze_pose(synth.pose);
      ++cases;

      const auto rises = std::count_if(r.transitions.begin(), r.transitions.end(), [](auto& t) {
        return t.kind == TransitionKind::kSitToStand;
      });
      if (rises != 5 || r.total_cycles != 5) ++cycle_failures;

      const std::size_t target = 2 * static_cast<std::size_t>(cycle) +
                                 (kind == TransitionKind::kStandToSit ? 1 : 0);
      if (r.total_hesitations != static_cast<int>(k) || target >= r.transitions.size() ||
          r.transitions[target].hesitation_count != static_cast<int>(k)) {
        ++plateau_failures;
      }

      for (auto [s, dx, dy] : {std::tuple{2.0, 0.0, 0.0}, std::tuple{0.5, 40.0, -90.0},
                               std::tuple{1.0, -15.0, 120.0}, std::tuple{3.0, 7.0, 7.0}}) {
        if (!same_counts(r, analytics::analyze_pose(transform(synth.pose, s, dx, dy)))) {
          ++invariance_failures;
        }
      }
    }
  }
  return {cycle_failures + plateau_failures + invariance_failures == 0,
          std::to_string(cases) + " five-cycle sequences: " + std::to_string(cycle_failures) +
              " with a wrong rise count, " + std::to_string(plateau_failures) +
              " with a wrong plateau count (k in 0..3), " + std::to_string(invariance_failures) +
              " scale/translate variants differing"};
}

// ---------------------------------------------------------------- end to end

Outcome end_to_end() {
  const auto t0 = Wall::now();
  support::LiveServer server(3);
  server.start_workers({"phq8", "tug"}, 4);
  sim::FleetOptions o;
  o.server_url = server.url();
  o.subjects = 20;
  o.days = 3;
  o.seed = 2024;
  o.with_rule = true;
  o.rule_threshold = 10;
  const auto report = sim::run_fleet(o);

  net::HttpClient api(server.url(), report.researcher_token);
  const std::string base = "/v1/studies/" + report.study_id;
  const Json datapoints = api.get(base + "/datapoints")["datapoints"];
  const Json results = api.get(base + "/results")["results"];
  const Json datasets = api.get(base + "/datasets")["datasets"];
  const Json cohorts = api.get(base + "/cohorts")["cohorts"];

  // Brute force: latest PHQ-8 result per (day, subject) in the source cohort.
  std::set<std::string> everyone;
  for (const auto& c : cohorts) {
    if (c["name"] == "everyone") {
      for (const auto& m : c["member_ids"]) everyone.insert(m.get<std::string>());
    }
  }
  std::map<std::string, std::map<std::string, std::pair<std::string, double>>> latest;
  for (const auto& r : results) {
    if (r["worker_kind"] != "phq8") continue;
    const std::string collected = r["collected_at"];
    const std::string subject = r["subject_id"];
    if (!everyone.contains(subject)) continue;
    auto& slot = latest[collected.substr(0, 10)][subject];
    if (slot.first <= collected) slot = {collected, r["body"]["total_score"].get<double>()};
  }
  std::map<std::string, std::set<std::string>> expected;
  for (const auto& [day, subjects] : latest) {
    for (const auto& [subject, v] : subjects) {
      if (v.second < o.rule_threshold) expected["mobility-" + day].insert(subject);
    }
  }
  std::map<std::string, std::set<std::string>> derived;
  for (const auto& c : cohorts) {
    if (c["origin"] != "rule_derived") continue;
    auto& set = derived[c["name"].get<std::string>()];
    for (const auto& m : c["member_ids"]) set.insert(m.get<std::string>());
  }

  std::set<std::string> with_result;
  for (const auto& r : results) with_result.insert(r["dataset_id"].get<std::string>());
  int unresolved = 0;
  for (const auto& d : datasets) {
    if (d["status"] != "open" && !with_result.contains(d["dataset_id"].get<std::string>())) {
      ++unresolved;
    }
    if (d["status"] != "processed") ++unresolved;
  }
  server.stop_workers();
  const double secs = seconds_since(t0);

  const bool counts_ok = static_cast<std::int64_t>(datapoints.size()) == report.completed;
  const bool cohorts_ok = derived == expected;
  return {counts_ok && cohorts_ok && unresolved == 0 && report.settled && secs < 60.0,
          "20 subjects x 3 days: datapoints " + std::to_string(datapoints.size()) +
              " vs completed " + std::to_string(report.completed) + ", " +
              std::to_string(derived.size()) + " rule cohorts " +
              (cohorts_ok ? "equal" : "DIFFER from") + " brute force, " +
              std::to_string(datasets.size()) + " datasets with " + std::to_string(unresolved) +
              " lacking a result, " + fmt(secs, 1) + " s (limit 60 s)"};
}

// ---------------------------------------------------------------- queue

// Records every lease and ack against the service clock; the clock only
// moves while no claim or ack is in flight.
class RecordingBackend final : public worker::Backend {
 public:
  struct Lease {
    std::int64_t start = 0;
    std::int64_t expires = 0;
    std::optional<std::int64_t> released;  // accepted ack
  };

  RecordingBackend(ctm::CtmService& svc, Credential cred, ManualClock& clock,
                   std::shared_mutex& clock_gate)
      : inner_(svc, std::move(cred)), clock_(clock), gate_(clock_gate) {}

  std::optional<ctm::ClaimedJob> claim(const std::string& kind, std::int64_t lease_ms) override {
    std::shared_lock gate(gate_);
    std::lock_guard lock(mu_);  // serializes claims so the log order is the claim order
    auto job = inner_.claim(kind, lease_ms);
    if (job) {
      const std::int64_t now = clock_.now().ms;
      leases_[job->job.job_id].push_back({now, job->job.lease_expires_at->ms, std::nullopt});
      if (!claimed_.contains(job->job.job_id)) {
        claimed_.insert(job->job.job_id);
        first_claims_.push_back(job->job.job_id);
      }
    }
    return job;
  }

  std::vector<std::uint8_t> fetch_object(const std::string& sha) override {
    return inner_.fetch_object(sha);
  }

  void submit(const ctm::ResultSubmission& s) override { inner_.submit(s); }

  queue::JobState ack(const std::string& job_id, int attempts, queue::Outcome outcome,
                      const std::string& reason) override {
    std::shared_lock gate(gate_);
    const std::int64_t now = clock_.now().ms;
    auto state = inner_.ack(job_id, attempts, outcome, reason);
    std::lock_guard lock(mu_);
    auto& l = leases_[job_id];
    if (attempts >= 1 && static_cast<std::size_t>(attempts) <= l.size()) {
      l[static_cast<std::size_t>(attempts) - 1].released = now;
    }
    return state;
  }

  std::map<std::string, std::vector<Lease>> leases() const {
    std::lock_guard lock(mu_);
    return leases_;
  }
  std::vector<std::string> first_claims() const {
    std::lock_guard lock(mu_);
    return first_claims_;
  }

 private:
  worker::LocalBackend inner_;
  ManualClock& clock_;
  std::shared_mutex& gate_;
  mutable std::mutex mu_;
  std::map<std::string, std::vector<Lease>> leases_;
  std::set<std::string> claimed_;
  std::vector<std::string> first_claims_;
};

std::uint64_t mix(const std::string& s, std::uint64_t salt) {
  std::uint64_t h = 1469598103934665603ull ^ salt;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

Outcome queue_properties() {
  support::LiveServer server(11);
  auto& svc = server.service();
  auto& clock = server.clock();
  auto created = svc.create_study("queue-acceptance");
  const std::string study = created.study.study_id;
  const Credential researcher = svc.authenticate(created.researcher_token);

  // 25 daily test-sets x 40 days, two subjects: 1,000 datasets.
  constexpr int kTestsets = 25, kDays = 40, kSubjects = 2;
  ctm::CohortSelector sel;
  std::vector<std::pair<Credential, std::string>> devices;
  for (int i = 0; i < kSubjects; ++i) {
    auto s = svc.enroll_subject(researcher, study,
                                {"q" + std::to_string(i), {}, "qd" + std::to_string(i)});
    sel.members.insert(s.subject.subject_id);
    devices.emplace_back(svc.authenticate(*s.device_token), "qd" + std::to_string(i));
  }
  auto cohort = svc.define_cohort(researcher, study, "all", sel);
  Schedule sched;
  sched.mode = ScheduleMode::kDaily;
  sched.window_start = TimeOfDay{0};
  sched.window_end = TimeOfDay{24 * 3'600'000};
  for (int t = 0; t < kTestsets; ++t) {
    auto ts = svc.create_testset(researcher, study, "ts" + std::to_string(t),
                                 {ctm::TestDraft{TestKind::kPhq8}});
    svc.create_task(researcher, study, ts.testset_id, cohort.cohort_id, sched);
  }
  for (int d = 0; d < kDays; ++d) {
    if (d > 0) clock.advance_ms(kMsPerDay);
    svc.tick();
    for (auto& [cred, device] : devices) {
      for (const auto& p : svc.poll_tasks(cred, device, std::nullopt)) {
        analytics::Phq8Document doc{p.occurrence.subject_id, p.occurrence.occurrence_id,
                                    clock.now(), {}};
        doc.response.answers = {1, 2, 0, 1, 3, 0, 1, d % 4};
        ctm::UploadEnvelope e;
        e.occurrence_id = p.occurrence.occurrence_id;
        e.test_id = p.testset.tests[0].test_id;
        e.idempotency_key = p.occurrence.occurrence_id;
        e.collected_at = clock.now();
        e.kind = PayloadKind::kText;
        e.document = analytics::to_document(doc);
        svc.upload(cred, device, e);
      }
    }
  }
  svc.tick();
  const auto enqueue_order = svc.job_queue().list(std::nullopt, std::nullopt, 5000);
  const std::size_t jobs_total = enqueue_order.size();

  // 5% of analytic calls fail; another 1% stall long enough (in clock time)
  // for their lease to lapse and the job to be redelivered.
  auto w = worker::standard_worker("phq8");
  std::atomic<int> calls{0};
  std::atomic<bool> running{true};
  worker::AnalyticFn flaky = [&](const worker::PreparedInput& in) {
    const int n = calls.fetch_add(1);
    const std::uint64_t h = mix(in.datapoint.datapoint_id, static_cast<std::uint64_t>(n));
    if (h % 100 < 5) throw Error(ErrorCode::kSchemaMismatch, "injected failure");
    if (h % 100 == 5) std::this_thread::sleep_for(std::chrono::milliseconds(40));
    return w.analytic(in);
  };

  std::shared_mutex gate;
  RecordingBackend backend(svc, svc.authenticate(support::LiveServer::kWorkerToken), clock, gate);
  std::thread ticker([&] {
    while (running) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
      std::unique_lock lock(gate);
      clock.advance_ms(1'000);
    }
  });
  worker::WorkerOptions wo;
  wo.concurrency = 4;
  wo.lease_ms = 10'000;
  wo.exit_when_idle = true;
  wo.idle_poll_ms = 5;
  std::atomic<bool> stop{false};
  auto report = worker::run_worker(backend, w.descriptor, flaky, wo, stop);
  // Leases abandoned at the very end still need to lapse and be retried.
  for (int round = 0; round < 10 && svc.job_queue().counts().ready +
                                            svc.job_queue().counts().leased > 0;
       ++round) {
    {
      std::unique_lock lock(gate);
      clock.advance_ms(wo.lease_ms + 1);
    }
    svc.job_queue().reap_expired();
    auto more = worker::run_worker(backend, w.descriptor, flaky, wo, stop);
    report.processed += more.processed;
    report.failed += more.failed;
  }
  running = false;
  ticker.join();

  const auto counts = svc.job_queue().counts();
  const bool terminal = counts.ready == 0 && counts.leased == 0 &&
                        counts.done + counts.dead == static_cast<std::int64_t>(jobs_total);

  // Exactly one result per datapoint of a done job, none duplicated.
  std::map<std::string, int> per_datapoint;
  for (const auto& r : svc.fetch_results(researcher, {study})) ++per_datapoint[r.datapoint_id];
  int duplicates = 0, missing = 0;
  for (const auto& [dp, n] : per_datapoint) duplicates += n > 1;
  Credential worker_cred = svc.authenticate(support::LiveServer::kWorkerToken);
  for (const auto& job : svc.job_queue().list(queue::JobState::kDone, std::nullopt, 5000)) {
    for (const auto& dp : svc.describe_dataset(worker_cred, job.dataset_id).datapoints) {
      missing += !per_datapoint.contains(dp.datapoint_id);
    }
  }

  // Valid lease intervals per job never overlap.
  int overlaps = 0;
  std::size_t redelivered = 0;
  for (const auto& [job, leases] : backend.leases()) {
    redelivered += leases.size() > 1;
    for (std::size_t i = 1; i < leases.size(); ++i) {
      const auto& prev = leases[i - 1];
      const std::int64_t end = prev.released ? *prev.released : prev.expires;
      if (leases[i].start < end) ++overlaps;
    }
  }

  // First claims follow enqueue order.
  std::map<std::string, std::size_t> rank;
  for (std::size_t i = 0; i < enqueue_order.size(); ++i) rank[enqueue_order[i].job_id] = i;
  const auto firsts = backend.first_claims();
  int fifo_breaks = 0;
  for (std::size_t i = 1; i < firsts.size(); ++i) fifo_breaks += rank[firsts[i]] < rank[firsts[i - 1]];

  return {jobs_total == 1000 && terminal && duplicates == 0 && missing == 0 && overlaps == 0 &&
              fifo_breaks == 0 && firsts.size() == jobs_total,
          std::to_string(jobs_total) + " jobs, 4 loops: done " + std::to_string(counts.done) +
              ", dead " + std::to_string(counts.dead) + ", " + std::to_string(report.failed) +
              " failed acks, " + std::to_string(redelivered) + " redelivered; " +
              std::to_string(duplicates) + " duplicate and " + std::to_string(missing) +
              " missing results, " + std::to_string(overlaps) + " lease overlaps, " +
              std::to_string(fifo_breaks) + " FIFO breaks"};
}

// ---------------------------------------------------------------- tenancy

struct Tenant {
  std::string study_id;
  std::unique_ptr<net::HttpClient> researcher;
  std::unique_ptr<net::HttpClient> device;
  std::string device_id;
  std::string subject_id;
  std::string cohort_id;
  std::string testset_id;
  std::string rule_id;
  std::string occurrence_id;
  std::string test_id;
};

Tenant make_tenant(const std::string& url, int i) {
  Tenant t;
  net::HttpClient admin(url);
  auto created = *admin.post("/v1/studies", {{"name", "tenant-" + std::to_string(i)}});
  t.study_id = created["study"]["study_id"];
  t.researcher = std::make_unique<net::HttpClient>(url, created["researcher_token"]);
  const std::string base = "/v1/studies/" + t.study_id;
  t.device_id = "tenant-watch-" + std::to_string(i);
  auto sub = *t.researcher->post(base + "/subjects", {{"raw_id", "p" + std::to_string(i)},
                                                      {"device_id", t.device_id},
                                                      {"attributes", {{"age", 60 + i}}}});
  t.subject_id = sub["subject"]["subject_id"];
  t.device = std::make_unique<net::HttpClient>(url, sub["device_token"]);
  t.cohort_id = (*t.researcher->post(base + "/cohorts",
                                     {{"name", "c"},
                                      {"selector", {{"explicit", {t.subject_id}}}}}))["cohort_id"];
  auto ts = *t.researcher->post(base + "/testsets", {{"name", "t"}, {"tests", {{{"kind", "phq8"}}}}});
  t.testset_id = ts["testset_id"];
  t.test_id = ts["tests"][0]["test_id"];
  auto task = *t.researcher->post(
      base + "/tasks", {{"testset_id", t.testset_id},
                        {"cohort_id", t.cohort_id},
                        {"schedule", {{"mode", "once"}, {"window_start", "00:00"}, {"window_end", "24:00"}}}});
  t.occurrence_id = task["occurrences"][0]["occurrence_id"];
  t.rule_id = (*t.researcher->post(
      base + "/rules",
      Json{{"name", "r"},
           {"trigger", {{"type", "on_result"}, {"worker_kind", "phq8"}}},
           {"predicate", {{"metric", "total_score"}, {"comparator", "<"}, {"value", 10}}},
           {"action", {{"target_testset_id", t.testset_id},
                       {"sub_cohort_name", "s"},
                       {"source_cohort_id", t.cohort_id}}}}))["rule_id"];
  return t;
}

Outcome tenancy() {
  support::LiveServer server(21);
  std::vector<Tenant> tenants;
  for (int i = 0; i < 6; ++i) tenants.push_back(make_tenant(server.url(), i));

  using Op = std::function<void(const net::HttpClient&, const Tenant& own, const Tenant& other)>;
  const std::vector<std::pair<std::string, Op>> ops = {
      {"get study", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id); }},
      {"list subjects", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/subjects"); }},
      {"enroll", [](auto& c, auto&, auto& o) {
         c.post("/v1/studies/" + o.study_id + "/subjects", {{"raw_id", "intruder"}});
       }},
      {"list cohorts", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/cohorts"); }},
      {"define cohort", [](auto& c, auto&, auto& o) {
         c.post("/v1/studies/" + o.study_id + "/cohorts",
                {{"name", "x"}, {"selector", {{"explicit", {o.subject_id}}}}});
       }},
      {"create testset", [](auto& c, auto&, auto& o) {
         c.post("/v1/studies/" + o.study_id + "/testsets", {{"name", "x"}, {"tests", {{{"kind", "tug"}}}}});
       }},
      {"list testsets", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/testsets"); }},
      {"create task", [](auto& c, auto&, auto& o) {
         c.post("/v1/studies/" + o.study_id + "/tasks",
                {{"testset_id", o.testset_id}, {"cohort_id", o.cohort_id},
                 {"schedule", {{"mode", "once"}, {"window_start", "09:00"}, {"window_end", "10:00"}}}});
       }},
      {"task with foreign cohort", [](auto& c, auto& own, auto& o) {
         c.post("/v1/studies/" + own.study_id + "/tasks",
                {{"testset_id", own.testset_id}, {"cohort_id", o.cohort_id},
                 {"schedule", {{"mode", "once"}, {"window_start", "09:00"}, {"window_end", "10:00"}}}});
       }},
      {"list tasks", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/tasks"); }},
      {"occurrences", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/occurrences"); }},
      {"list rules", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/rules"); }},
      {"evaluate rule", [](auto& c, auto&, auto& o) {
         c.post("/v1/studies/" + o.study_id + "/rules/" + o.rule_id + "/evaluate", Json::object());
       }},
      {"results", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/results"); }},
      {"results of foreign subject", [](auto& c, auto& own, auto& o) {
         c.get("/v1/studies/" + own.study_id + "/results", {{"subject", o.subject_id}});
       }},
      {"datapoints", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/datapoints"); }},
      {"datasets", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/datasets"); }},
      {"vault", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/vault"); }},
      {"board", [](auto& c, auto&, auto& o) { c.get("/v1/studies/" + o.study_id + "/board"); }},
      {"device token", [](auto& c, auto&, auto& o) {
         c.post("/v1/studies/" + o.study_id + "/subjects/" + o.subject_id + "/device-token", Json::object());
       }},
      {"poll foreign device", [](auto& c, auto&, auto& o) {
         c.get("/v1/devices/" + o.device_id + "/pending-tasks");
       }},
      {"upload as foreign device", [](auto& c, auto&, auto& o) {
         c.post("/v1/devices/" + o.device_id + "/uploads",
                {{"occurrence_id", o.occurrence_id}, {"test_id", o.test_id},
                 {"idempotency_key", "x"}, {"collected_at", "2024-01-01T10:00:00Z"},
                 {"kind", "text"},
                 {"document", {{"schema", "phq8/v1"}, {"answers", {0, 0, 0, 0, 0, 0, 0, 0}}}}});
       }},
  };

  sim::Rng rng(4242);
  int forbidden = 0;
  std::vector<std::string> leaks;
  for (int i = 0; i < 200; ++i) {
    const std::size_t a = rng.below(tenants.size());
    std::size_t b = rng.below(tenants.size() - 1);
    if (b >= a) ++b;
    const bool as_device = rng.bernoulli(0.3);
    const auto& [name, op] = ops[rng.below(ops.size())];
    const net::HttpClient& cred = as_device ? *tenants[a].device : *tenants[a].researcher;
    try {
      op(cred, tenants[a], tenants[b]);
      leaks.push_back(name + " succeeded");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kForbidden) {
        ++forbidden;
      } else {
        leaks.push_back(name + (as_device ? " (device)" : "") + " -> " +
                        std::string(to_string(e.code())));
      }
    }
  }
  std::string detail = "200 cross-study pairs over " + std::to_string(ops.size()) +
                       " operations, " + std::to_string(forbidden) + " FORBIDDEN";
  for (std::size_t i = 0; i < std::min<std::size_t>(leaks.size(), 3); ++i) detail += "; " + leaks[i];
  return {forbidden == 200, detail};
}

// ---------------------------------------------------------------- crash recovery

Outcome crash_recovery() {
  support::LiveServer server(31);
  auto& svc = server.service();
  auto created = svc.create_study("crash");
  const Credential researcher = svc.authenticate(created.researcher_token);
  const std::string study = created.study.study_id;
  auto s = svc.enroll_subject(researcher, study, {"c0", {}, "cd0"});
  const Credential device = svc.authenticate(*s.device_token);
  ctm::CohortSelector sel;
  sel.members.insert(s.subject.subject_id);
  auto cohort = svc.define_cohort(researcher, study, "all", sel);
  auto ts = svc.create_testset(researcher, study, "phq", {ctm::TestDraft{TestKind::kPhq8}});
  Schedule sched;
  sched.window_start = TimeOfDay{0};
  sched.window_end = TimeOfDay{24 * 3'600'000};
  svc.create_task(researcher, study, ts.testset_id, cohort.cohort_id, sched);
  for (const auto& p : svc.poll_tasks(device, "cd0", std::nullopt)) {
    analytics::Phq8Document doc{p.occurrence.subject_id, p.occurrence.occurrence_id,
                                server.clock().now(), {}};
    doc.response.answers = {2, 2, 1, 1, 0, 0, 1, 1};
    ctm::UploadEnvelope e;
    e.occurrence_id = p.occurrence.occurrence_id;
    e.test_id = p.testset.tests[0].test_id;
    e.idempotency_key = "crash";
    e.collected_at = server.clock().now();
    e.kind = PayloadKind::kText;
    e.document = analytics::to_document(doc);
    svc.upload(device, "cd0", e);
  }
  svc.tick();
  if (svc.job_queue().counts().ready != 1) {
    return {false, "setup enqueued " + std::to_string(svc.job_queue().counts().ready) + " jobs"};
  }

  // A worker process claims the job and stalls; it is killed mid-job.
  auto dir = support::fresh_dir("crash");
  support::Process victim({HG_CLI_PATH, "--server", server.url(), "--token",
                           support::LiveServer::kWorkerToken, "worker", "--kind", "phq8",
                           "--lease-secs", "30", "--stall-ms", "60000"},
                          dir / "victim.log");
  const auto deadline = Wall::now() + std::chrono::seconds(20);
  while (svc.job_queue().counts().leased == 0 && Wall::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  if (svc.job_queue().counts().leased != 1) return {false, "worker never claimed the job"};
  victim.signal(SIGKILL);
  victim.wait();
  const bool still_leased = svc.job_queue().counts().leased == 1;

  // After the lease lapses a second worker picks the job up and finishes it.
  server.clock().advance_ms(31'000);
  auto second = support::run({HG_CLI_PATH, "--server", server.url(), "--token",
                              support::LiveServer::kWorkerToken, "worker", "--kind", "phq8",
                              "--exit-when-idle"},
                             dir / "second.log");
  const auto jobs = svc.job_queue().list();
  const auto results = svc.fetch_results(researcher, {study});
  const bool ok = still_leased && second.code == 0 && jobs.size() == 1 &&
                  jobs[0].state == queue::JobState::kDone && jobs[0].attempts == 2 &&
                  results.size() == 1;
  return {ok, std::string("killed worker left the lease ") + (still_leased ? "held" : "RELEASED") +
                  "; after expiry the job finished on attempt " +
                  std::to_string(jobs.empty() ? 0 : jobs[0].attempts) + " (" +
                  (jobs.empty() ? "?" : std::string(queue::to_string(jobs[0].state))) + "), " +
                  std::to_string(results.size()) + " result row(s)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> checks = {
      {"phq8-exhaustive", phq8_exhaustive},
      {"step-detection", step_detection},
      {"feature-correctness", feature_correctness},
      {"tug-forest-mae", forest_mae},
      {"sit-to-stand", sts_oracle},
      {"end-to-end", end_to_end},
      {"queue-properties", queue_properties},
      {"multi-tenancy", tenancy},
      {"crash-recovery", crash_recovery},
  };

  CLI::App app{"Acceptance checks"};
  std::vector<std::string> only;
  bool list = false;
  app.add_option("--only", only, "Run just these checks");
  app.add_flag("--list", list, "Print check names");
  CLI11_PARSE(app, argc, argv);
  if (list) {
    for (const auto& [name, fn] : checks) std::cout << name << "\n";
    return 0;
  }

  int failed = 0, ran = 0;
  for (const auto& [name, fn] : checks) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    ++ran;
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    failed += !out.pass;
    std::cout << (out.pass ? "PASS " : "FAIL ") << name << ": " << out.detail << std::endl;
  }
  if (ran == 0) {
    std::cerr << "no check matched\n";
    return 1;
  }
  return failed == 0 ? 0 : 1;
}
