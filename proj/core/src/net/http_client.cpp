#include "hg/net/http_client.hpp"

#include <httplib.h>

#include "hg/common/error.hpp"

namespace hg::net {
namespace {

httplib::Headers auth_headers(const std::string& token) {
  httplib::Headers h{{"Accept", "application/json"}};
  if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
  return h;
}

[[noreturn]] void raise(const httplib::Result& res, const std::string& what) {
  if (!res) {
    throw Error(ErrorCode::kUnavailable, what + ": " + httplib::to_string(res.error()));
  }
  Json body = Json::parse(res->body, nullptr, false);
  if (body.is_object() && body.contains("code") && body["code"].is_string()) {
    throw Error(error_code_from_string(body["code"].get<std::string>()),
                body.value("message", std::string()));
  }
  throw Error(res->status >= 500 ? ErrorCode::kUnavailable : ErrorCode::kInternal,
              what + ": HTTP " + std::to_string(res->status));
}

Json parse_body(const std::string& text) {
  if (text.empty()) return Json();
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kInternal, "server sent malformed JSON");
  return j;
}

httplib::Client make_client(const std::string& base, std::int64_t timeout_ms) {
  httplib::Client c(base);
  const auto secs = static_cast<time_t>(timeout_ms / 1000);
  const auto usecs = static_cast<time_t>((timeout_ms % 1000) * 1000);
  c.set_connection_timeout(5, 0);
  c.set_read_timeout(secs, usecs);
  c.set_write_timeout(secs, usecs);
  return c;
}

}  // namespace

HttpClient::HttpClient(std::string base_url, std::string token)
    : base_url_(std::move(base_url)), token_(std::move(token)) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

Json HttpClient::get(const std::string& path, const Query& query) const {
  auto client = make_client(base_url_, timeout_ms_);
  httplib::Params params(query.begin(), query.end());
  auto res = client.Get(path, params, auth_headers(token_));
  if (!res || res->status / 100 != 2) raise(res, "GET " + path);
  return parse_body(res->body);
}

std::optional<Json> HttpClient::post(const std::string& path, const Json& body) const {
  auto client = make_client(base_url_, timeout_ms_);
  auto res = client.Post(path, auth_headers(token_), body.dump(), "application/json");
  if (!res || res->status / 100 != 2) raise(res, "POST " + path);
  if (res->status == 204) return std::nullopt;
  return parse_body(res->body);
}

std::vector<std::uint8_t> HttpClient::get_bytes(const std::string& path) const {
  auto client = make_client(base_url_, timeout_ms_);
  auto res = client.Get(path, auth_headers(token_));
  if (!res || res->status / 100 != 2) raise(res, "GET " + path);
  return {res->body.begin(), res->body.end()};
}

}  // namespace hg::net
