#include <gtest/gtest.h>

#include "hg/analytics/phq8.hpp"
#include "hg/analytics/tug.hpp"
#include "hg/common/error.hpp"
#include "hg/sim/synth.hpp"
#include "hg/worker/worker.hpp"
#include "support/live_server.hpp"

using namespace hg;

namespace {

class WorkerFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    auto created = svc().create_study("w");
    study = created.study.study_id;
    researcher = svc().authenticate(created.researcher_token);
    worker_cred = svc().authenticate(support::LiveServer::kWorkerToken);
  }

  ctm::CtmService& svc() { return server.service(); }

  // n subjects each upload one PHQ-8 response; one dataset per test-day.
  void enqueue_phq8_days(int subjects, int days) {
    ctm::CohortSelector sel;
    std::vector<std::pair<Credential, std::string>> devices;
    for (int i = 0; i < subjects; ++i) {
      auto s = svc().enroll_subject(researcher, study,
                                    {"r" + std::to_string(i), {}, "d" + std::to_string(i)});
      sel.members.insert(s.subject.subject_id);
      devices.emplace_back(svc().authenticate(*s.device_token), "d" + std::to_string(i));
    }
    auto cohort = svc().define_cohort(researcher, study, "all", sel);
    auto ts = svc().create_testset(researcher, study, "phq", {ctm::TestDraft{TestKind::kPhq8}});
    Schedule sched;
    sched.mode = ScheduleMode::kDaily;
    sched.window_start = TimeOfDay{0};
    sched.window_end = TimeOfDay{24 * 3'600'000};
    svc().create_task(researcher, study, ts.testset_id, cohort.cohort_id, sched);
    for (int d = 0; d < days; ++d) {
      if (d > 0) {
        server.clock().advance_ms(kMsPerDay);
        svc().tick();
      }
      for (auto& [cred, device] : devices) {
        for (const auto& p : svc().poll_tasks(cred, device, std::nullopt)) {
          analytics::Phq8Document doc{p.occurrence.subject_id, p.occurrence.occurrence_id,
                                      server.clock().now(), {}};
          doc.response.answers = {1, 1, 1, 1, 0, 0, 0, static_cast<int>(d % 4)};
          ctm::UploadEnvelope e;
          e.occurrence_id = p.occurrence.occurrence_id;
          e.test_id = p.testset.tests[0].test_id;
          e.idempotency_key = "k";
          e.collected_at = server.clock().now();
          e.kind = PayloadKind::kText;
          e.document = analytics::to_document(doc);
          svc().upload(cred, device, e);
        }
      }
      svc().tick();
    }
  }

  support::LiveServer server;
  std::string study;
  Credential researcher;
  Credential worker_cred;
};

}  // namespace

TEST_F(WorkerFixture, TenJobsOneWorker) {
  enqueue_phq8_days(1, 10);
  ASSERT_EQ(svc().job_queue().counts().ready, 10);
  worker::LocalBackend backend(svc(), worker_cred);
  auto w = worker::standard_worker("phq8");
  worker::WorkerOptions o;
  o.exit_when_idle = true;
  std::atomic<bool> stop{false};
  auto report = worker::run_worker(backend, w.descriptor, w.analytic, o, stop);
  EXPECT_EQ(report.processed, 10);
  EXPECT_EQ(report.failed, 0);
  EXPECT_EQ(svc().job_queue().counts().done, 10);
  auto results = svc().fetch_results(researcher, {study});
  ASSERT_EQ(results.size(), 10u);
  EXPECT_EQ(results[3].body["total_score"], 7);
  EXPECT_EQ(results[3].body["schema"], "phq8.result/v1");
}

TEST_F(WorkerFixture, AnalyticErrorsEndInDeadLetter) {
  enqueue_phq8_days(2, 1);
  worker::LocalBackend backend(svc(), worker_cred);
  auto w = worker::standard_worker("phq8");
  worker::AnalyticFn broken = [](const worker::PreparedInput&) -> Json {
    throw Error(ErrorCode::kSchemaMismatch, "unreadable answers");
  };
  worker::WorkerOptions o;
  o.exit_when_idle = true;
  std::atomic<bool> stop{false};
  auto report = worker::run_worker(backend, w.descriptor, broken, o, stop);
  EXPECT_EQ(report.processed, 0);
  EXPECT_EQ(report.failed, 4);  // first delivery plus three retries
  auto jobs = svc().job_queue().list();
  ASSERT_EQ(jobs.size(), 1u);
  EXPECT_EQ(jobs[0].state, queue::JobState::kDead);
  ASSERT_TRUE(jobs[0].last_error);
  EXPECT_NE(jobs[0].last_error->find("unreadable answers"), std::string::npos);
  EXPECT_EQ(svc().fetch_results(researcher, {study}).size(), 0u);
}

TEST_F(WorkerFixture, PartialFailureKeepsGoodResults) {
  enqueue_phq8_days(3, 1);
  worker::LocalBackend backend(svc(), worker_cred);
  auto w = worker::standard_worker("phq8");
  int calls = 0;
  worker::AnalyticFn flaky = [&](const worker::PreparedInput& in) -> Json {
    if (++calls == 2) throw Error(ErrorCode::kSchemaMismatch, "bad");
    return w.analytic(in);
  };
  worker::WorkerOptions o;
  o.exit_when_idle = true;
  std::atomic<bool> stop{false};
  auto report = worker::run_worker(backend, w.descriptor, flaky, o, stop);
  EXPECT_EQ(report.failed, 1);
  EXPECT_EQ(report.processed, 1);  // the redelivery succeeds
  EXPECT_EQ(svc().fetch_results(researcher, {study}).size(), 3u);
}

TEST_F(WorkerFixture, ConcurrencyBoundsLeases) {
  enqueue_phq8_days(1, 12);
  worker::LocalBackend backend(svc(), worker_cred);
  auto w = worker::standard_worker("phq8");
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  worker::AnalyticFn slow = [&](const worker::PreparedInput& in) {
    int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    --in_flight;
    return w.analytic(in);
  };
  worker::WorkerOptions o;
  o.concurrency = 3;
  o.exit_when_idle = true;
  std::atomic<bool> stop{false};
  auto report = worker::run_worker(backend, w.descriptor, slow, o, stop);
  EXPECT_EQ(report.processed, 12);
  EXPECT_LE(peak.load(), 3);
  EXPECT_GE(peak.load(), 2);
}

TEST(WorkerKinds, StandardKindsAndUnknown) {
  for (const auto& k : worker::standard_worker_kinds()) {
    EXPECT_EQ(worker::standard_worker(k).descriptor.worker_kind, k);
  }
  try {
    worker::standard_worker("ecg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
  worker::StandardOptions o;
  o.tug_model = "/nonexistent/model.json";
  try {
    worker::standard_worker("tug", o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kModelNotFound);
  }
}

TEST(WorkerKinds, ShippedTugModelMatchesDefault) {
  auto shipped = analytics::load_tug_model(std::string(HG_MODELS_DIR) + "/tug_linear_default.json");
  EXPECT_EQ(shipped->to_json(), analytics::default_tug_model()->to_json());
}
