#include "ensemjudge/http.hpp"

#include <cstdlib>

#include <httplib.h>

#include "ensemjudge/error.hpp"

namespace ensemjudge::http {

std::chrono::milliseconds timeout_from_env() {
  if (const char* raw = std::getenv(kTimeoutEnv)) {
    char* end = nullptr;
    const long long ms = std::strtoll(raw, &end, 10);
    if (end != raw && *end == '\0' && ms > 0) return std::chrono::milliseconds(ms);
  }
  return std::chrono::milliseconds(30000);
}

nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body) {
  httplib::Client client(base_url);
  if (!client.is_valid()) throw AdapterError("invalid endpoint '" + base_url + "'");
  const auto timeout = timeout_from_env();
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    throw AdapterError("POST " + base_url + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw AdapterError("POST " + base_url + path + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw AdapterError("POST " + base_url + path + " returned malformed JSON: " + e.what());
  }
}

}  // namespace ensemjudge::http
