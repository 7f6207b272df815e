#pragma once

#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

inline nlohmann::json load_fixture(const std::string& name) {
  std::ifstream in(std::string(HG_FIXTURE_DIR) + "/" + name);
  return nlohmann::json::parse(in);
}
