#pragma once

#include <filesystem>
#include <string>

#include "hg/net/http_client.hpp"

namespace hg::exporter {

inline constexpr const char* kResultsHeader =
    "result_id,study_id,subject_id,occurrence_id,test_id,worker_kind,collected_at,produced_at,"
    "metric,value";

// One CSV row per top-level numeric field of each result body, leaving out
// schema_version.
std::string results_csv(const Json& results);
// raw_id,pseudonym,study_id
std::string vault_csv(const Json& vault);

struct ExportSummary {
  std::size_t results = 0;
  std::size_t result_rows = 0;
  std::size_t datapoints = 0;
  std::size_t vault_entries = 0;
  bool vault = false;
};

// Writes results.csv, datapoints.jsonl and, when asked, vault.csv into
// out_dir (created if missing). Fails before writing anything if the
// credential cannot read the study.
ExportSummary export_study(const net::HttpClient& api, const std::string& study_id,
                           const std::filesystem::path& out_dir, bool with_vault);

}  // namespace hg::exporter
