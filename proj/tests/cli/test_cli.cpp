#include <gtest/gtest.h>

#include <netinet/in.h>
#include <sys/socket.h>

#include <fstream>

#include "hg/common/error.hpp"
#include "hg/net/http_client.hpp"
#include "hg/sim/fleet.hpp"
#include "support/live_server.hpp"
#include "support/process.hpp"

using namespace hg;
using support::run;

namespace {

const std::string kHg = HG_CLI_PATH;

int free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

std::size_t line_count(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

struct SimStudy {
  std::string study_id;
  std::string researcher_token;
};

SimStudy phq8_study(support::LiveServer& s, std::size_t subjects, int days, double compliance) {
  sim::FleetOptions o;
  o.server_url = s.url();
  o.subjects = subjects;
  o.days = days;
  o.compliance = compliance;
  o.with_rule = false;
  auto r = sim::run_fleet(o);
  return {r.study_id, r.researcher_token};
}

}  // namespace

TEST(Cli, ServeCreatesDataDirAndAnswersHealth) {
  auto dir = support::fresh_dir("cli_serve") / "nested" / "data";
  const int port = free_port();
  support::Process p({kHg, "serve", "--port", std::to_string(port), "--data-dir", dir.string(),
                      "--tick-secs", "0"},
                     dir.parent_path().parent_path() / "serve.log");
  net::HttpClient c("http://127.0.0.1:" + std::to_string(port));
  Json health;
  for (int i = 0; i < 200 && health.is_null(); ++i) {
    try {
      health = c.get("/v1/healthz");
    } catch (const Error&) {
      std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
  }
  EXPECT_EQ(health["status"], "ok");
  EXPECT_TRUE(std::filesystem::exists(dir / "worker.token"));
  p.signal(SIGTERM);
  EXPECT_EQ(p.wait(), 0) << p.output();
}

TEST(Cli, BusyPortExitsTwo) {
  support::LiveServer s;
  const std::string port = s.url().substr(s.url().rfind(':') + 1);
  auto dir = support::fresh_dir("cli_busy");
  auto r = run({kHg, "serve", "--port", port, "--data-dir", (dir / "d").string()}, dir / "log");
  EXPECT_EQ(r.code, 2) << r.output;
}

TEST(Cli, UnknownSubcommandIsUsage) {
  auto dir = support::fresh_dir("cli_usage");
  EXPECT_EQ(run({kHg, "frobnicate"}, dir / "log").code, 1);
  EXPECT_EQ(run({kHg, "worker"}, dir / "log").code, 1);
}

TEST(Cli, ExportWritesOneRowPerResult) {
  support::LiveServer s;
  s.start_workers({"phq8"});
  auto study = phq8_study(s, 10, 3, 1.0);
  auto dir = support::fresh_dir("cli_export");
  auto r = run({kHg, "--server", s.url(), "--token", study.researcher_token, "export", "--study",
                study.study_id, "--out", (dir / "out").string()},
               dir / "log");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(line_count(dir / "out" / "results.csv"), 31u);
  EXPECT_EQ(line_count(dir / "out" / "datapoints.jsonl"), 30u);
  EXPECT_EQ(line_count(dir / "out" / "vault.csv"), 11u);
}

TEST(Cli, EmptyStudyExportsHeadersOnly) {
  support::LiveServer s;
  auto study = phq8_study(s, 3, 1, 0.0);
  auto dir = support::fresh_dir("cli_empty");
  auto r = run({kHg, "--server", s.url(), "--token", study.researcher_token, "export", "--study",
                study.study_id, "--out", (dir / "out").string(), "--no-vault"},
               dir / "log");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(line_count(dir / "out" / "results.csv"), 1u);
  EXPECT_EQ(line_count(dir / "out" / "datapoints.jsonl"), 0u);
}

TEST(Cli, DeviceTokenExportIsForbidden) {
  support::LiveServer s;
  net::HttpClient admin(s.url());
  auto created = admin.post("/v1/studies", {{"name", "dev"}});
  const std::string sid = created->at("study").at("study_id").get<std::string>();
  net::HttpClient r(s.url(), created->at("researcher_token").get<std::string>());
  auto sub = r.post("/v1/studies/" + sid + "/subjects", {{"raw_id", "x"}, {"device_id", "dx"}});
  auto dir = support::fresh_dir("cli_device");
  auto out = run({kHg, "--server", s.url(), "--token", sub->at("device_token").get<std::string>(),
                  "export", "--study", sid, "--out", (dir / "out").string()},
                 dir / "log");
  EXPECT_EQ(out.code, 3);
  EXPECT_NE(out.output.find("FORBIDDEN"), std::string::npos) << out.output;
  EXPECT_FALSE(std::filesystem::exists(dir / "out" / "results.csv"));
}

TEST(Cli, StudyApplyReportsAndValidates) {
  support::LiveServer s;
  auto dir = support::fresh_dir("cli_apply");
  auto first = run({kHg, "--server", s.url(), "--json", "study", "apply",
                    std::string(HG_DOCS_DIR) + "/example-study.yaml"},
                   dir / "log1");
  ASSERT_EQ(first.code, 0) << first.output;
  Json report = Json::parse(first.output);
  EXPECT_EQ(report["counts"]["cohorts"]["created"], 2);
  EXPECT_EQ(report["counts"]["testsets"]["created"], 3);
  EXPECT_EQ(report["counts"]["rules"]["created"], 1);

  auto again = run({kHg, "--server", s.url(), "--token", report["researcher_token"], "--json",
                    "study", "apply", std::string(HG_DOCS_DIR) + "/example-study.yaml"},
                   dir / "log2");
  ASSERT_EQ(again.code, 0) << again.output;
  Json second = Json::parse(again.output);
  for (const auto& [kind, c] : second["counts"].items()) EXPECT_EQ(c["created"], 0) << kind;

  std::ofstream(dir / "bad.yaml") << "study: x\ntestsets:\n  - name: t\n    tests:\n"
                                     "      - kind: gait_video\n";
  auto bad = run({kHg, "--server", s.url(), "study", "apply", (dir / "bad.yaml").string()},
                 dir / "log3");
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.output.find("bad.yaml:5: testsets[0].tests[0].kind"), std::string::npos)
      << bad.output;
}

TEST(Cli, PoseFromCsv) {
  auto dir = support::fresh_dir("cli_pose");
  std::ofstream(dir / "p.csv") << "t,shoulder_y,hip_y\n0,100,220\n0.04,101,221\n0.08,102,222\n";
  auto r = run({kHg, "pose-from-csv", (dir / "p.csv").string(), "--out", (dir / "p.json").string()},
               dir / "log");
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(dir / "p.json");
  Json doc = Json::parse(in);
  EXPECT_EQ(doc["schema"], "pose2d/v1");
  EXPECT_DOUBLE_EQ(doc["fps"].get<double>(), 25.0);
  EXPECT_EQ(doc["frames"].size(), 3u);
}
