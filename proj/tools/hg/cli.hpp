#pragma once

#include <CLI11.hpp>

#include <functional>
#include <string>

#include "hg/domain/entities.hpp"

namespace hg::cli {

enum ExitCode { kOk = 0, kUsage = 1, kInfra = 2, kRejected = 3 };

struct Globals {
  std::string server = "http://127.0.0.1:8080";
  std::string token;
  bool json = false;
};

// Prints either the JSON document or the human-readable text.
void emit(const Globals& g, const Json& doc, const std::string& text);

// Each registers its subcommand and stores the action to run when selected.
using Action = std::function<int()>;
void add_serve(CLI::App& app, Globals& g, Action& action);
void add_worker(CLI::App& app, Globals& g, Action& action);
void add_sim(CLI::App& app, Globals& g, Action& action);
void add_study(CLI::App& app, Globals& g, Action& action);
void add_export(CLI::App& app, Globals& g, Action& action);
void add_queue(CLI::App& app, Globals& g, Action& action);
void add_vault(CLI::App& app, Globals& g, Action& action);
void add_pose_from_csv(CLI::App& app, Globals& g, Action& action);

}  // namespace hg::cli
