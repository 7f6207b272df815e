#include <iostream>

#include "cli.hpp"
#include "hg/common/error.hpp"

namespace hg::cli {

void emit(const Globals& g, const Json& doc, const std::string& text) {
  if (g.json) {
    std::cout << doc.dump(2) << "\n";
  } else if (!text.empty()) {
    std::cout << text << (text.back() == '\n' ? "" : "\n");
  }
}

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnavailable:
    case ErrorCode::kInternal:
    case ErrorCode::kCorrupt:
      return kInfra;
    default:
      return kRejected;
  }
}

}  // namespace
}  // namespace hg::cli

int main(int argc, char** argv) {
  using namespace hg::cli;
  CLI::App app{"Health Guardian operator tool"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--server", g.server, "Service base URL")->envname("HG_SERVER");
  app.add_option("--token", g.token, "Bearer token")->envname("HG_TOKEN");
  app.add_flag("--json", g.json, "Machine-readable output");

  Action action;
  add_serve(app, g, action);
  add_worker(app, g, action);
  add_sim(app, g, action);
  add_study(app, g, action);
  add_export(app, g, action);
  add_queue(app, g, action);
  add_vault(app, g, action);
  add_pose_from_csv(app, g, action);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const hg::Error& e) {
    std::cerr << "hg: " << hg::to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "hg: " << e.what() << "\n";
    return kInfra;
  }
}
