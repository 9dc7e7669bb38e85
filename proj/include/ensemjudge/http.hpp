#pragma once

#include <chrono>
#include <string>

#include <json.hpp>

namespace ensemjudge::http {

inline constexpr const char* kTimeoutEnv = "ENSEMJUDGE_HTTP_TIMEOUT_MS";

// ENSEMJUDGE_HTTP_TIMEOUT_MS, or 30 s.
std::chrono::milliseconds timeout_from_env();

// POSTs `body` to base_url + path and parses the JSON reply. Throws
// AdapterError on connection failure, non-2xx status, or a non-JSON body.
nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const nlohmann::json& body);

}  // namespace ensemjudge::http
