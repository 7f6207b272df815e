#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hg/domain/entities.hpp"

namespace hg::net {

using Query = std::multimap<std::string, std::string>;

// Minimal JSON-over-HTTP client for the /v1 API. Non-2xx replies carrying
// {code, message} are rethrown as hg::Error with the same code; transport
// failures become UNAVAILABLE.
class HttpClient {
 public:
  explicit HttpClient(std::string base_url, std::string token = {});

  void set_token(std::string token) { token_ = std::move(token); }
  const std::string& base_url() const { return base_url_; }

  Json get(const std::string& path, const Query& query = {}) const;
  // Empty optional on 204 No Content.
  std::optional<Json> post(const std::string& path, const Json& body) const;
  std::vector<std::uint8_t> get_bytes(const std::string& path) const;

  void set_timeout_ms(std::int64_t ms) { timeout_ms_ = ms; }

 private:
  std::string base_url_;
  std::string token_;
  std::int64_t timeout_ms_ = 30'000;
};

}  // namespace hg::net
