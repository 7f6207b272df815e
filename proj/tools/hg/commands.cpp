#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "hg/analytics/sts.hpp"
#include "hg/common/error.hpp"
#include "hg/common/time.hpp"
#include "hg/export/export.hpp"
#include "hg/manifest/manifest.hpp"
#include "hg/net/http_client.hpp"
#include "hg/sim/fleet.hpp"
#include "hg/worker/worker.hpp"

namespace hg::cli {
namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_stop_signal(int) { g_stop.store(true); }

void install_stop_handlers() {
  std::signal(SIGINT, on_stop_signal);
  std::signal(SIGTERM, on_stop_signal);
}

void require_token(const Globals& g, const char* what) {
  if (g.token.empty()) throw Error(ErrorCode::kUnauthorized, std::string(what) + " needs --token");
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kUnavailable, "cannot write " + path);
}

// ---- worker

struct WorkerArgs {
  std::string kind;
  int concurrency = 1;
  std::int64_t stall_ms = 0;
  double lease_secs = 60;
  std::string model;
  bool exit_when_idle = false;
};

int run_worker_cmd(const Globals& g, const WorkerArgs& a) {
  require_token(g, "worker");
  worker::StandardOptions so;
  if (!a.model.empty()) so.tug_model = a.model;
  auto w = worker::standard_worker(a.kind, so);
  worker::WorkerOptions o;
  o.concurrency = a.concurrency;
  o.stall_ms = a.stall_ms;
  o.lease_ms = static_cast<std::int64_t>(a.lease_secs * 1000.0);
  o.exit_when_idle = a.exit_when_idle;
  install_stop_handlers();
  worker::HttpBackend backend(g.server, g.token);
  auto report = worker::run_worker(backend, w.descriptor, w.analytic, o, g_stop);
  Json doc{{"worker_kind", a.kind},
           {"processed", report.processed},
           {"failed", report.failed},
           {"abandoned", report.abandoned},
           {"results", report.results}};
  std::ostringstream text;
  text << a.kind << ": processed " << report.processed << ", failed " << report.failed
       << ", abandoned " << report.abandoned << ", results " << report.results;
  emit(g, doc, text.str());
  return kOk;
}

// ---- sim

struct SimArgs {
  sim::FleetOptions fleet;
  std::string start_day;
  std::string report_path;
  bool no_rule = false;
  std::vector<std::string> workers;
  std::string worker_token;
};

int run_sim_cmd(const Globals& g, SimArgs a) {
  a.fleet.server_url = g.server;
  a.fleet.with_rule = !a.no_rule;
  if (!a.start_day.empty()) a.fleet.start_day = parse_date(a.start_day);

  // Optional in-process workers attached over HTTP for a one-command demo.
  std::atomic<bool> stop_workers{false};
  std::vector<std::thread> threads;
  for (const auto& kind : a.workers) {
    auto w = worker::standard_worker(kind);
    if (a.worker_token.empty()) {
      throw Error(ErrorCode::kValidation, "--with-worker needs --worker-token");
    }
    threads.emplace_back([&, w, kind] {
      worker::HttpBackend backend(g.server, a.worker_token);
      worker::WorkerOptions o;
      o.concurrency = 2;
      o.idle_poll_ms = 50;
      o.drain_grace_ms = 5'000;
      worker::run_worker(backend, w.descriptor, w.analytic, o, stop_workers);
    });
  }
  sim::FleetReport report;
  try {
    report = sim::run_fleet(a.fleet);
  } catch (...) {
    stop_workers = true;
    for (auto& t : threads) t.join();
    throw;
  }
  stop_workers = true;
  for (auto& t : threads) t.join();

  Json doc = sim::to_json(report);
  if (!a.report_path.empty()) write_text(a.report_path, doc.dump(2) + "\n");
  std::ostringstream text;
  text << report.study_name << ": " << report.days << " days, " << report.subjects.size()
       << " subjects; delivered " << report.delivered << ", completed " << report.completed
       << ", missed " << report.missed << (report.settled ? "" : " (not settled)") << "\n"
       << "study_id " << report.study_id << "\nresearcher_token " << report.researcher_token;
  Json full = doc;
  full["study_id"] = report.study_id;
  full["researcher_token"] = report.researcher_token;
  emit(g, full, text.str());
  return report.settled ? kOk : kInfra;
}

// ---- study apply

int run_apply_cmd(const Globals& g, const std::string& file, const std::string& admin_token) {
  auto m = manifest::load_manifest(file);
  std::optional<std::string> token;
  if (!g.token.empty()) token = g.token;
  auto report = manifest::apply_manifest(m, g.server, admin_token, token);
  std::ostringstream text;
  text << "study " << report.study_name << " " << report.study_id << "\n";
  if (report.researcher_token) text << "researcher_token " << *report.researcher_token << "\n";
  for (const auto& [kind, c] : report.counts) {
    text << kind << ": " << c.created << " created, " << c.matched << " matched\n";
  }
  for (const auto& [kind, names] : report.ids.items()) {
    for (const auto& [name, id] : names.items()) {
      text << "  " << kind << " " << name << " -> " << id.get<std::string>() << "\n";
    }
  }
  emit(g, to_json(report), text.str());
  return kOk;
}

// ---- export / vault

int run_export_cmd(const Globals& g, const std::string& study, const std::string& out,
                   bool no_vault) {
  require_token(g, "export");
  net::HttpClient api(g.server, g.token);
  auto s = exporter::export_study(api, study, out, !no_vault);
  Json doc{{"study_id", study},
           {"out_dir", out},
           {"results", s.results},
           {"result_rows", s.result_rows},
           {"datapoints", s.datapoints}};
  if (s.vault) doc["vault_entries"] = s.vault_entries;
  std::ostringstream text;
  text << "wrote " << out << ": " << s.result_rows << " result rows, " << s.datapoints
       << " datapoints" << (s.vault ? ", " + std::to_string(s.vault_entries) + " vault entries" : "");
  emit(g, doc, text.str());
  return kOk;
}

int run_vault_cmd(const Globals& g, const std::string& study, const std::string& out) {
  require_token(g, "vault export");
  net::HttpClient api(g.server, g.token);
  const Json vault = api.get("/v1/studies/" + study + "/vault");
  if (g.json) {
    std::cout << vault.dump(2) << "\n";
  } else {
    write_text(out, exporter::vault_csv(vault));
  }
  return kOk;
}

// ---- queue inspect

int run_queue_cmd(const Globals& g, const std::string& state, const std::string& kind) {
  require_token(g, "queue inspect");
  net::HttpClient api(g.server, g.token);
  net::Query q;
  if (!state.empty()) q.emplace("state", state);
  if (!kind.empty()) q.emplace("kind", kind);
  const Json stats = api.get("/v1/queue/stats");
  const Json jobs = api.get("/v1/queue/jobs", q)["jobs"];
  std::ostringstream text;
  text << "ready " << stats.value("ready", 0) << "  leased " << stats.value("leased", 0)
       << "  done " << stats.value("done", 0) << "  dead " << stats.value("dead", 0) << "\n";
  for (const auto& j : jobs) {
    text << j.value("job_id", "") << "  " << j.value("worker_kind", "") << "  "
         << j.value("state", "") << "  attempts " << j.value("attempts", 0);
    if (j.contains("last_error") && j["last_error"].is_string()) {
      text << "  " << j["last_error"].get<std::string>();
    }
    text << "\n";
  }
  emit(g, Json{{"stats", stats}, {"jobs", jobs}}, text.str());
  return kOk;
}

// ---- pose-from-csv

int run_pose_cmd(const std::string& in_path, const std::string& out, double fps, double x) {
  std::ifstream in(in_path);
  if (!in) throw Error(ErrorCode::kValidation, "cannot read " + in_path);
  auto pose = analytics::pose_from_csv(in, fps, x);
  write_text(out, analytics::to_document(pose).dump() + "\n");
  return kOk;
}

}  // namespace

void add_worker(CLI::App& app, Globals& g, Action& action) {
  auto a = std::make_shared<WorkerArgs>();
  auto* cmd = app.add_subcommand("worker", "Run an analytic worker against the queue");
  cmd->add_option("--kind", a->kind, "phq8, tug or sit_to_stand")->required();
  cmd->add_option("--concurrency", a->concurrency, "Claim loops")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--lease-secs", a->lease_secs, "Lease length")->capture_default_str();
  cmd->add_option("--model", a->model, "TUG model file");
  cmd->add_option("--stall-ms", a->stall_ms, "Sleep after each claim (fault injection)");
  cmd->add_flag("--exit-when-idle", a->exit_when_idle, "Stop once the queue is empty");
  cmd->callback([a, &g, &action] {
    if (g.token.empty()) {
      if (const char* env = std::getenv("HG_WORKER_TOKEN")) g.token = env;
    }
    action = [a, &g] { return run_worker_cmd(g, *a); };
  });
}

void add_sim(CLI::App& app, Globals& g, Action& action) {
  auto a = std::make_shared<SimArgs>();
  auto* cmd = app.add_subcommand("sim", "Drive a simulated device fleet on a virtual clock");
  cmd->add_option("--subjects", a->fleet.subjects)->capture_default_str();
  cmd->add_option("--days", a->fleet.days)->capture_default_str();
  cmd->add_option("--compliance", a->fleet.compliance)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--seed", a->fleet.seed)->capture_default_str();
  cmd->add_option("--start-day", a->start_day, "First day (default: day after the server clock)");
  cmd->add_option("--report", a->report_path, "Write the JSON report here");
  cmd->add_option("--admin-token", a->fleet.admin_token)->envname("HG_ADMIN_TOKEN");
  cmd->add_flag("--no-rule", a->no_rule, "Skip the PHQ-8 to TUG rule");
  cmd->add_option("--rule-threshold", a->fleet.rule_threshold)->capture_default_str();
  cmd->add_option("--max-in-flight", a->fleet.max_in_flight)->capture_default_str();
  cmd->add_option("--settle-timeout-ms", a->fleet.settle_timeout_ms)->capture_default_str();
  cmd->add_option("--with-worker", a->workers, "Attach in-process workers of these kinds");
  cmd->add_option("--worker-token", a->worker_token)->envname("HG_WORKER_TOKEN");
  cmd->callback([a, &g, &action] { action = [a, &g] { return run_sim_cmd(g, *a); }; });
}

void add_study(CLI::App& app, Globals& g, Action& action) {
  auto* study = app.add_subcommand("study", "Study authoring");
  study->require_subcommand(1);
  auto file = std::make_shared<std::string>();
  auto admin = std::make_shared<std::string>();
  auto* apply = study->add_subcommand("apply", "Create or match everything in a YAML manifest");
  apply->add_option("file", *file, "Manifest path")->required()->check(CLI::ExistingFile);
  apply->add_option("--admin-token", *admin)->envname("HG_ADMIN_TOKEN");
  apply->callback([file, admin, &g, &action] {
    action = [file, admin, &g] { return run_apply_cmd(g, *file, *admin); };
  });
}

void add_export(CLI::App& app, Globals& g, Action& action) {
  auto study = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("./export");
  auto no_vault = std::make_shared<bool>(false);
  auto* cmd = app.add_subcommand("export", "Write results.csv, datapoints.jsonl and vault.csv");
  cmd->add_option("--study", *study)->required();
  cmd->add_option("--out", *out, "Output directory")->capture_default_str();
  cmd->add_flag("--no-vault", *no_vault, "Skip the pseudonym vault");
  cmd->callback([=, &g, &action] {
    action = [=, &g] { return run_export_cmd(g, *study, *out, *no_vault); };
  });
}

void add_queue(CLI::App& app, Globals& g, Action& action) {
  auto* queue = app.add_subcommand("queue", "Job queue tools");
  queue->require_subcommand(1);
  auto state = std::make_shared<std::string>();
  auto kind = std::make_shared<std::string>();
  auto* inspect = queue->add_subcommand("inspect", "Show queue counts and jobs");
  inspect->add_option("--state", *state, "ready, leased, done or dead");
  inspect->add_option("--kind", *kind, "Worker kind");
  inspect->callback([=, &g, &action] {
    if (g.token.empty()) {
      if (const char* env = std::getenv("HG_WORKER_TOKEN")) g.token = env;
    }
    action = [=, &g] { return run_queue_cmd(g, *state, *kind); };
  });
}

void add_vault(CLI::App& app, Globals& g, Action& action) {
  auto* vault = app.add_subcommand("vault", "Pseudonym vault");
  vault->require_subcommand(1);
  auto study = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("-");
  auto* exp = vault->add_subcommand("export", "raw_id,pseudonym,study_id as CSV");
  exp->add_option("--study", *study)->required();
  exp->add_option("--out", *out, "File, or - for stdout")->capture_default_str();
  exp->callback([=, &g, &action] {
    action = [=, &g] { return run_vault_cmd(g, *study, *out); };
  });
}

void add_pose_from_csv(CLI::App& app, Globals&, Action& action) {
  auto in = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>("-");
  auto fps = std::make_shared<double>(0.0);
  auto x = std::make_shared<double>(320.0);
  auto* cmd = app.add_subcommand("pose-from-csv", "Convert t,shoulder_y,hip_y rows to pose2d/v1");
  cmd->add_option("input", *in, "CSV file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", *out, "File, or - for stdout")->capture_default_str();
  cmd->add_option("--fps", *fps, "Frame rate (default: from the first interval)");
  cmd->add_option("--x", *x, "Horizontal pixel position of both keypoints")->capture_default_str();
  cmd->callback([=, &action] { action = [=] { return run_pose_cmd(*in, *out, *fps, *x); }; });
}

}  // namespace hg::cli
