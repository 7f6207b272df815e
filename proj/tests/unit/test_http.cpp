#include <gtest/gtest.h>

#include <httplib.h>

#include "hg/common/error.hpp"
#include "hg/net/http_client.hpp"
#include "hg/sim/fleet.hpp"
#include "support/live_server.hpp"

using namespace hg;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInternal;
}

struct StudyHandle {
  std::string id;
  net::HttpClient researcher;
};

StudyHandle make_study(const support::LiveServer& s, const std::string& name) {
  net::HttpClient admin(s.url());
  auto out = admin.post("/v1/studies", {{"name", name}});
  return {out->at("study").at("study_id").get<std::string>(),
          net::HttpClient(s.url(), out->at("researcher_token").get<std::string>())};
}

}  // namespace

TEST(Http, HealthAndMeta) {
  support::LiveServer s;
  net::HttpClient c(s.url());
  EXPECT_EQ(c.get("/v1/healthz")["status"], "ok");
  auto meta = c.get("/v1/meta");
  EXPECT_EQ(meta["server_url"], s.url());
  EXPECT_TRUE(meta["virtual_clock"].get<bool>());
  EXPECT_EQ(code_of([&] { c.get("/v1/nope"); }), ErrorCode::kNotFound);
}

TEST(Http, ErrorsAreJson) {
  support::LiveServer s;
  httplib::Client raw(s.url());
  auto res = raw.Get("/v1/studies/stu_x");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 401);
  auto body = Json::parse(res->body);
  EXPECT_EQ(body["code"], "UNAUTHORIZED");
  EXPECT_TRUE(body.contains("message"));

  auto bad = raw.Post("/v1/studies", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(Json::parse(bad->body)["code"], "VALIDATION");
}

TEST(Http, StudyDesignRoundTrip) {
  support::LiveServer s;
  auto a = make_study(s, "a");
  const std::string base = "/v1/studies/" + a.id;
  for (int age : {63, 70, 81}) {
    a.researcher.post(base + "/subjects", {{"raw_id", "p" + std::to_string(age)},
                                           {"device_id", "w" + std::to_string(age)},
                                           {"attributes", {{"age", age}}}});
  }
  auto cohort = a.researcher.post(
      base + "/cohorts",
      Json::parse(R"({"name":"older","selector":{"filter":[{"attr":"age","op":">=","value":65}]}})"));
  EXPECT_EQ(cohort->at("member_ids").size(), 2u);
  EXPECT_EQ(code_of([&] {
              a.researcher.post(base + "/cohorts",
                                Json::parse(R"({"name":"g","selector":{"filter":[
                                  {"attr":"gait_speed","op":"<","value":1}]}})"));
            }),
            ErrorCode::kBadFilter);
  auto ts = a.researcher.post(base + "/testsets",
                              {{"name", "phq"}, {"tests", {{{"kind", "phq8"}}}}});
  EXPECT_EQ(code_of([&] {
              a.researcher.post(base + "/testsets",
                                {{"name", "x"}, {"tests", {{{"kind", "ecg"}}}}});
            }),
            ErrorCode::kValidation);
  auto task = a.researcher.post(
      base + "/tasks", {{"testset_id", ts->at("testset_id")},
                        {"cohort_id", cohort->at("cohort_id")},
                        {"schedule", {{"mode", "once"}, {"window_start", "09:00"}, {"window_end", "21:00"}}}});
  EXPECT_EQ(task->at("occurrences").size(), 2u);
  auto board = a.researcher.get(base + "/board");
  EXPECT_EQ(board["occurrences"]["pending"], 2);
  EXPECT_EQ(board["occurrences"]["total"], 2);
}

TEST(Http, CrossStudyIsForbidden) {
  support::LiveServer s;
  auto a = make_study(s, "a");
  auto b = make_study(s, "b");
  auto sub = b.researcher.post("/v1/studies/" + b.id + "/subjects",
                               {{"raw_id", "x"}, {"device_id", "dx"}});
  const std::string b_subject = sub->at("subject").at("subject_id").get<std::string>();
  EXPECT_EQ(code_of([&] { a.researcher.get("/v1/studies/" + b.id); }), ErrorCode::kForbidden);
  EXPECT_EQ(code_of([&] { a.researcher.get("/v1/studies/" + b.id + "/results"); }),
            ErrorCode::kForbidden);
  EXPECT_EQ(code_of([&] {
              a.researcher.get("/v1/studies/" + a.id + "/results", {{"subject", b_subject}});
            }),
            ErrorCode::kForbidden);
  net::HttpClient device(s.url(), sub->at("device_token").get<std::string>());
  EXPECT_EQ(code_of([&] { device.get("/v1/studies/" + a.id + "/results"); }),
            ErrorCode::kForbidden);
  EXPECT_EQ(code_of([&] { device.get("/v1/studies/" + b.id + "/board"); }),
            ErrorCode::kForbidden);
}

TEST(Http, ForeignStudyBodyIsNotValidated) {
  support::LiveServer s;
  auto a = make_study(s, "a");
  auto b = make_study(s, "b");
  EXPECT_EQ(code_of([&] { a.researcher.post("/v1/studies/" + b.id + "/cohorts", {{"name", 3}}); }),
            ErrorCode::kForbidden);
  EXPECT_EQ(code_of([&] { a.researcher.post("/v1/studies/" + b.id + "/tasks", Json::object()); }),
            ErrorCode::kForbidden);
  auto sub = b.researcher.post("/v1/studies/" + b.id + "/subjects",
                               {{"raw_id", "p1"}, {"device_id", "watch-b"}});
  EXPECT_EQ(code_of([&] { a.researcher.post("/v1/devices/watch-b/uploads", {{"bogus", true}}); }),
            ErrorCode::kForbidden);
  EXPECT_TRUE(sub->contains("device_token"));
}

TEST(Http, QueueEndpoints) {
  support::LiveServer s;
  net::HttpClient w(s.url(), support::LiveServer::kWorkerToken);
  EXPECT_FALSE(w.post("/v1/queue/claim", {{"worker_kind", "phq8"}, {"lease_secs", 5}}));
  auto stats = w.get("/v1/queue/stats");
  EXPECT_EQ(stats["total"], 0);
  EXPECT_EQ(code_of([&] {
              w.post("/v1/queue/job_missing/ack", {{"outcome", "success"}, {"lease_attempts", 1}});
            }),
            ErrorCode::kNotFound);
  net::HttpClient anon(s.url());
  EXPECT_EQ(code_of([&] { anon.post("/v1/queue/claim", {{"worker_kind", "phq8"}}); }),
            ErrorCode::kUnauthorized);
}

TEST(Fleet, FullComplianceCountsMatch) {
  support::LiveServer s;
  s.start_workers({"phq8"});
  sim::FleetOptions o;
  o.server_url = s.url();
  o.subjects = 10;
  o.days = 3;
  o.with_rule = false;
  auto report = sim::run_fleet(o);
  EXPECT_EQ(report.completed, 30);
  EXPECT_TRUE(report.settled);
  net::HttpClient r(s.url(), report.researcher_token);
  auto board = r.get("/v1/studies/" + report.study_id + "/board");
  EXPECT_EQ(board["datapoints"], 30);
  EXPECT_EQ(board["results"], 30);
  EXPECT_EQ(board["occurrences"]["completed"], 30);
}

TEST(Fleet, ZeroComplianceExpiresEverything) {
  support::LiveServer s;
  sim::FleetOptions o;
  o.server_url = s.url();
  o.subjects = 10;
  o.days = 3;
  o.compliance = 0.0;
  o.with_rule = false;
  auto report = sim::run_fleet(o);
  EXPECT_EQ(report.completed, 0);
  net::HttpClient r(s.url(), report.researcher_token);
  auto board = r.get("/v1/studies/" + report.study_id + "/board");
  EXPECT_EQ(board["datapoints"], 0);
  EXPECT_EQ(board["occurrences"]["expired"], 30);
}

TEST(Fleet, ReportIsDeterministic) {
  auto once = [] {
    support::LiveServer s;
    s.start_workers({"phq8", "tug"});
    sim::FleetOptions o;
    o.server_url = s.url();
    o.subjects = 6;
    o.days = 3;
    o.compliance = 0.5;
    o.seed = 42;
    return sim::to_json(sim::run_fleet(o)).dump();
  };
  const std::string first = once();
  EXPECT_EQ(first, once());
  EXPECT_NE(first.find("\"ground_truth\""), std::string::npos);
}
