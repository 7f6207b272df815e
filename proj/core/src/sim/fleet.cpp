#include "hg/sim/fleet.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include "hg/common/crypto.hpp"
#include "hg/common/error.hpp"
#include "hg/net/http_client.hpp"
#include "hg/sim/synth.hpp"

namespace hg::sim {
namespace {

struct Device {
  std::size_t index = 0;
  SubjectProfile profile;
  std::string raw_id;
  std::string device_id;
  std::string subject_id;
  std::string token;
  SubjectReport report;
  std::vector<TruthEntry> truth;
};

std::string study_path(const std::string& study_id) { return "/v1/studies/" + study_id; }

// Per (subject, day, test) stream, independent of scheduling order.
std::uint64_t stream_seed(const SubjectProfile& p, int day, std::size_t slot) {
  return derive_seed(p.seed, static_cast<std::uint64_t>(day) * 64 + slot + 1);
}

Json file_payload(const Json& document) {
  const std::string text = document.dump();
  return Json{{"kind", "file"},
              {"media_type", "application/json"},
              {"data_base64", crypto::base64_encode(std::vector<std::uint8_t>(text.begin(), text.end()))}};
}

class Fleet {
 public:
  explicit Fleet(const FleetOptions& o)
      : o_(o), admin_(o.server_url, o.admin_token), researcher_(o.server_url) {}

  FleetReport run() {
    setup();
    for (int d = 0; d < o_.days; ++d) play_day(d);
    return finish();
  }

 private:
  void set_clock(Timestamp t) {
    admin_.post("/v1/admin/clock", {{"now", format_timestamp(t)}});
  }

  void setup() {
    if (o_.start_day) {
      first_day_ = *o_.start_day;
    } else {
      auto clock = admin_.get("/v1/admin/clock");
      first_day_ = date_of(parse_timestamp(clock.at("now").get<std::string>())).next();
    }
    set_clock(first_day_.start());

    name_ = "sim-" + std::to_string(o_.seed);
    for (int attempt = 1;; ++attempt) {
      const std::string name = attempt == 1 ? name_ : name_ + "-" + std::to_string(attempt);
      try {
        auto created = admin_.post("/v1/studies", {{"name", name}});
        study_id_ = created->at("study").at("study_id").get<std::string>();
        researcher_.set_token(created->at("researcher_token").get<std::string>());
        token_ = created->at("researcher_token").get<std::string>();
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kConflict || attempt > 1000) throw;
      }
    }

    const std::string base = study_path(study_id_);
    Json members = Json::array();
    for (std::size_t i = 0; i < o_.subjects; ++i) {
      Device dev;
      dev.index = i;
      dev.profile = make_profile(o_.seed, i, o_.compliance);
      dev.raw_id = name_ + "-subject-" + std::to_string(i);
      dev.device_id = name_ + "-watch-" + std::to_string(i);
      Rng attrs(derive_seed(dev.profile.seed, 0));
      auto out = researcher_.post(
          base + "/subjects",
          {{"raw_id", dev.raw_id},
           {"device_id", dev.device_id},
           {"attributes", {{"age", std::round(attrs.uniform(55.0, 90.0))}}}});
      dev.subject_id = out->at("subject").at("subject_id").get<std::string>();
      if (out->contains("device_token")) {
        dev.token = out->at("device_token").get<std::string>();
      } else {
        dev.token = researcher_
                        .post(base + "/subjects/" + dev.subject_id + "/device-token", Json::object())
                        ->at("device_token")
                        .get<std::string>();
      }
      dev.report.index = i;
      dev.report.raw_id = dev.raw_id;
      dev.report.compliance_prob = dev.profile.compliance_prob;
      members.push_back(dev.subject_id);
      devices_.push_back(std::move(dev));
    }

    auto cohort = researcher_.post(base + "/cohorts",
                                   {{"name", "everyone"}, {"selector", {{"explicit", members}}}});
    const std::string cohort_id = cohort->at("cohort_id").get<std::string>();
    auto phq = researcher_.post(base + "/testsets",
                                {{"name", "daily-phq8"}, {"tests", {{{"kind", "phq8"}}}}});
    Json schedule = {{"mode", "daily"},
                     {"window_start", format_time_of_day(o_.window_start)},
                     {"window_end", format_time_of_day(o_.window_end)},
                     {"start_date", format_date(first_day_)},
                     {"end_date", format_date(Date{first_day_.days + o_.days - 1})}};
    researcher_.post(base + "/tasks", {{"testset_id", phq->at("testset_id")},
                                       {"cohort_id", cohort_id},
                                       {"schedule", schedule}});
    if (o_.with_rule) {
      auto tug = researcher_.post(base + "/testsets",
                                  {{"name", "mobility-tug"}, {"tests", {{{"kind", "tug"}}}}});
      researcher_.post(base + "/rules",
                       {{"name", "low-phq8-to-tug"},
                        {"trigger", {{"type", "on_result"}, {"worker_kind", "phq8"}}},
                        {"predicate",
                         {{"metric", "total_score"}, {"comparator", "<"}, {"value", o_.rule_threshold}}},
                        {"action",
                         {{"target_testset_id", tug->at("testset_id")},
                          {"sub_cohort_name", "mobility"},
                          {"source_cohort_id", cohort_id},
                          {"window_start", format_time_of_day(o_.window_start)},
                          {"window_end", format_time_of_day(o_.window_end)},
                          {"day_offset", 1}}}});
    }
  }

  void play_day(int d) {
    const Date day{first_day_.days + d};
    set_clock(day.start());

    std::atomic<std::size_t> next{0};
    const std::size_t n = std::max<std::size_t>(1, std::min(o_.max_in_flight, devices_.size()));
    std::vector<std::thread> actors;
    std::mutex err_mu;
    std::optional<std::string> failure;
    for (std::size_t a = 0; a < n; ++a) {
      actors.emplace_back([&] {
        for (std::size_t i = next++; i < devices_.size(); i = next++) {
          try {
            device_day(devices_[i], d, day);
          } catch (const std::exception& e) {
            std::lock_guard lock(err_mu);
            if (!failure) failure = e.what();
          }
        }
      });
    }
    for (auto& t : actors) t.join();
    if (failure) throw Error(ErrorCode::kUnavailable, "device actor failed: " + *failure);

    set_clock(at(day, o_.window_end));
    if (!wait_settled()) settled_ = false;
    admin_.post("/v1/admin/tick", Json::object());
  }

  void device_day(Device& dev, int d, Date day) {
    net::HttpClient client(o_.server_url, dev.token);
    Rng timing(stream_seed(dev.profile, d, 0));
    const std::int64_t span = o_.window_end.ms - o_.window_start.ms;
    const std::int64_t offset =
        span > 2 * 3'600'000 ? static_cast<std::int64_t>(timing.uniform() * (span - 3'600'000))
                             : 0;
    const Timestamp poll_at = at(day, TimeOfDay{static_cast<std::int32_t>(o_.window_start.ms + offset)});
    auto polled = client.get("/v1/devices/" + dev.device_id + "/pending-tasks",
                             {{"now", format_timestamp(poll_at)}});

    // Stable order: by test-set name, then occurrence slot.
    std::vector<Json> tasks(polled.at("tasks").begin(), polled.at("tasks").end());
    std::sort(tasks.begin(), tasks.end(), [](const Json& a, const Json& b) {
      return std::tie(a.at("testset_name").get_ref<const std::string&>(),
                      a.at("slot").get_ref<const std::string&>()) <
             std::tie(b.at("testset_name").get_ref<const std::string&>(),
                      b.at("slot").get_ref<const std::string&>());
    });

    std::size_t slot = 0;
    for (const auto& task : tasks) {
      ++slot;
      ++dev.report.delivered;
      Rng rng(stream_seed(dev.profile, d, slot));
      if (!rng.bernoulli(dev.profile.compliance_prob)) {
        ++dev.report.missed;
        continue;
      }
      ++dev.report.attempted;
      const Timestamp collected = poll_at + 60'000 * static_cast<std::int64_t>(slot);
      bool all_ok = true;
      std::size_t t_index = 0;
      for (const auto& test : task.at("tests")) {
        const std::string key = name_ + "/s" + std::to_string(dev.index) + "/d" +
                                std::to_string(d) + "/" +
                                task.at("testset_name").get<std::string>() + "/" +
                                std::to_string(t_index++);
        TruthEntry truth;
        truth.idempotency_key = key;
        truth.subject_index = dev.index;
        truth.day = d;
        truth.test_kind = test.at("kind").get<std::string>();
        Json envelope = {{"occurrence_id", task.at("occurrence_id")},
                         {"test_id", test.at("test_id")},
                         {"idempotency_key", key},
                         {"collected_at", format_timestamp(collected)}};
        envelope["payload"] = synthesize(dev, task, test, collected, rng, truth);
        if (upload(client, dev, envelope)) {
          dev.truth.push_back(std::move(truth));
        } else {
          all_ok = false;
        }
      }
      if (all_ok) {
        ++dev.report.completed;
      } else {
        ++dev.report.missed;
      }
    }
  }

  Json synthesize(const Device& dev, const Json& task, const Json& test, Timestamp collected,
                  Rng& rng, TruthEntry& truth) {
    const std::string kind = test.at("kind").get<std::string>();
    const Json& params = test.at("params");
    if (kind == "phq8") {
      auto s = synth_phq8(dev.profile, rng);
      truth.expected_total = s.expected_total;
      analytics::Phq8Document doc{dev.subject_id, task.at("occurrence_id").get<std::string>(),
                                  collected, s.response};
      return Json{{"kind", "text"}, {"document", analytics::to_document(doc)}};
    }
    if (kind == "tug") {
      const double secs =
          std::max(dev.profile.gait.preferred_walk_secs, params.value("min_walk_secs", 30.0));
      auto s = synth_accel(dev.profile.gait, secs, rng);
      s.trace.subject_id = dev.subject_id;
      s.trace.device_id = dev.device_id;
      s.trace.start_time = collected;
      truth.step_times = s.step_times;
      return file_payload(analytics::to_document(s.trace));
    }
    if (kind == "sit_to_stand") {
      auto s = synth_pose(dev.profile.sts, params.value("cycles", 5), rng);
      truth.rises = s.truth.rises.size();
      truth.plateaus = s.truth.plateaus.size();
      return file_payload(analytics::to_document(s.pose));
    }
    throw Error(ErrorCode::kValidation, "simulator cannot perform test kind " + kind);
  }

  bool upload(const net::HttpClient& client, const Device& dev, const Json& envelope) {
    for (int attempt = 0; attempt <= o_.upload_retries; ++attempt) {
      try {
        client.post("/v1/devices/" + dev.device_id + "/uploads", envelope);
        return true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnavailable) {
          spdlog::warn("upload {} rejected: {}", envelope.at("idempotency_key").get<std::string>(),
                       e.what());
          return false;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(100 << attempt));
      }
    }
    return false;
  }

  bool wait_settled() {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(o_.settle_timeout_ms);
    while (true) {
      auto board = researcher_.get(study_path(study_id_) + "/board");
      const Json& ds = board.at("datasets");
      const bool busy = ds.value("open", 0) > 0 || ds.value("published", 0) > 0;
      if (!busy) return true;
      if (std::chrono::steady_clock::now() > deadline) return false;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

  FleetReport finish() {
    FleetReport r;
    r.study_name = name_;
    r.seed = o_.seed;
    r.days = o_.days;
    r.compliance = o_.compliance;
    r.settled = settled_;
    r.study_id = study_id_;
    r.researcher_token = token_;
    r.first_day = first_day_;
    for (auto& dev : devices_) {
      r.delivered += dev.report.delivered;
      r.attempted += dev.report.attempted;
      r.completed += dev.report.completed;
      r.missed += dev.report.missed;
      r.subjects.push_back(dev.report);
      for (auto& t : dev.truth) r.truth.push_back(std::move(t));
    }
    std::sort(r.truth.begin(), r.truth.end(), [](const TruthEntry& a, const TruthEntry& b) {
      return a.idempotency_key < b.idempotency_key;
    });
    return r;
  }

  const FleetOptions& o_;
  net::HttpClient admin_;
  net::HttpClient researcher_;
  std::string name_;
  std::string study_id_;
  std::string token_;
  Date first_day_;
  std::vector<Device> devices_;
  bool settled_ = true;
};

}  // namespace

FleetReport run_fleet(const FleetOptions& options) { return Fleet(options).run(); }

Json to_json(const FleetReport& r) {
  Json subjects = Json::array();
  for (const auto& s : r.subjects) {
    subjects.push_back({{"index", s.index},
                        {"raw_id", s.raw_id},
                        {"compliance_prob", s.compliance_prob},
                        {"delivered", s.delivered},
                        {"attempted", s.attempted},
                        {"completed", s.completed},
                        {"missed", s.missed}});
  }
  Json truth = Json::array();
  for (const auto& t : r.truth) {
    Json e{{"idempotency_key", t.idempotency_key},
           {"subject_index", t.subject_index},
           {"day", t.day},
           {"test_kind", t.test_kind}};
    if (t.expected_total) e["expected_total"] = *t.expected_total;
    if (t.test_kind == "tug") {
      e["step_count"] = t.step_times.size();
      e["step_times"] = t.step_times;
    }
    if (t.test_kind == "sit_to_stand") {
      e["rises"] = t.rises;
      e["plateaus"] = t.plateaus;
    }
    truth.push_back(std::move(e));
  }
  return Json{{"schema", "sim.report/v1"},
              {"study_name", r.study_name},
              {"seed", r.seed},
              {"days", r.days},
              {"compliance", r.compliance},
              {"delivered", r.delivered},
              {"attempted", r.attempted},
              {"completed", r.completed},
              {"missed", r.missed},
              {"settled", r.settled},
              {"subjects", std::move(subjects)},
              {"ground_truth", std::move(truth)}};
}

}  // namespace hg::sim
