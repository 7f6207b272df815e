#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "hg/domain/entities.hpp"
#include "hg/net/http_client.hpp"

namespace hg::manifest {

// A study manifest parsed from YAML into JSON, with the source line of
// every node kept under its JSON pointer for error messages.
struct Manifest {
  std::string source;  // file name used in messages
  Json doc;
  std::map<std::string, int> lines;

  int line_of(const std::string& pointer) const;
  // "<source>:<line>: <pointer>: <message>"
  std::string where(const std::string& pointer, const std::string& message) const;
};

// Throws VALIDATION with a line reference on malformed YAML or any
// structural problem (unknown keys, unknown test kinds, dangling names).
Manifest parse_manifest(const std::string& text, const std::string& source = "<manifest>");
Manifest load_manifest(const std::filesystem::path& path);

struct ApplyCounts {
  int created = 0;
  int matched = 0;
};

struct ApplyReport {
  std::string study_id;
  std::string study_name;
  std::optional<std::string> researcher_token;  // only when the study was created
  std::map<std::string, ApplyCounts> counts;     // by entity kind
  Json ids = Json::object();                     // kind -> name -> id

  int created_total() const;
};

Json to_json(const ApplyReport& report);

// Creates or matches every entity by name. Without a researcher token the
// study is created (needing the admin token if the server has one); with
// one, the token's study must carry the manifest's study name.
ApplyReport apply_manifest(const Manifest& manifest, const std::string& server_url,
                           const std::string& admin_token,
                           const std::optional<std::string>& researcher_token);

}  // namespace hg::manifest
