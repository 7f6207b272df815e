#include "hg/export/export.hpp"

#include <algorithm>
#include <fstream>

#include "hg/common/error.hpp"

namespace hg::exporter {
namespace {

std::string cell(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string field(const Json& j, const char* key) {
  return j.contains(key) && j[key].is_string() ? j[key].get<std::string>() : std::string();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw Error(ErrorCode::kUnavailable, "cannot write " + path.string());
}

}  // namespace

std::string results_csv(const Json& results) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const auto& r : results) {
    const std::string prefix = cell(field(r, "result_id")) + "," + cell(field(r, "study_id")) + "," +
                               cell(field(r, "subject_id")) + "," +
                               cell(field(r, "occurrence_id")) + "," + cell(field(r, "test_id")) +
                               "," + cell(field(r, "worker_kind")) + "," +
                               cell(field(r, "collected_at")) + "," +
                               cell(field(r, "produced_at")) + ",";
    for (const auto& [metric, value] : r.at("body").items()) {
      if (!value.is_number() || metric == "schema_version") continue;
      out += prefix + cell(metric) + "," + value.dump() + "\n";
    }
  }
  return out;
}

std::string vault_csv(const Json& vault) {
  const std::string study = vault.at("study_id").get<std::string>();
  std::string out = "raw_id,pseudonym,study_id\n";
  for (const auto& e : vault.at("entries")) {
    out += cell(e.at("raw_id").get<std::string>()) + "," + cell(e.at("pseudonym").get<std::string>()) +
           "," + cell(study) + "\n";
  }
  return out;
}

ExportSummary export_study(const net::HttpClient& api, const std::string& study_id,
                           const std::filesystem::path& out_dir, bool with_vault) {
  const std::string base = "/v1/studies/" + study_id;
  const Json results = api.get(base + "/results")["results"];
  const Json datapoints = api.get(base + "/datapoints")["datapoints"];
  Json vault;
  if (with_vault) vault = api.get(base + "/vault");

  std::filesystem::create_directories(out_dir);
  ExportSummary s;
  s.results = results.size();
  const std::string csv = results_csv(results);
  s.result_rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
  write_file(out_dir / "results.csv", csv);

  std::string jsonl;
  for (const auto& dp : datapoints) jsonl += dp.dump() + "\n";
  s.datapoints = datapoints.size();
  write_file(out_dir / "datapoints.jsonl", jsonl);

  if (with_vault) {
    s.vault = true;
    s.vault_entries = vault["entries"].size();
    write_file(out_dir / "vault.csv", vault_csv(vault));
  }
  return s;
}

}  // namespace hg::exporter
