#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ensemjudge/core.hpp"

namespace ensemjudge::support {

// Positive values support LLM, negative values support Human.
struct SupportSignal {
  double value = 0.0;
  std::optional<std::string> rationale;
};

inline constexpr const char* kProviderError = "provider_error";

enum class ProviderKind { Stub, HttpLlm };

struct Demonstration {
  std::string text;
  Label label = Label::LLM;
};

struct SupportConfig {
  ProviderKind kind = ProviderKind::Stub;
  std::string endpoint;  // http_llm only
  std::string prompt_template = default_prompt_template();
  std::vector<Demonstration> demonstrations;

  static std::string default_prompt_template();
  void validate() const;  // throws ConfigError
};

// JSONL {"text", "label"}.
std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path);

// Substitutes {examples} (demonstrations in order) and {input}. Throws
// ConfigError if either slot is absent from the template.
std::string build_prompt(const SupportConfig& config, const TextSample& sample);

class SupportProvider {
 public:
  virtual ~SupportProvider() = default;
  // Never throws for provider failures: they come back as value 0 with
  // rationale "provider_error".
  virtual SupportSignal query(const TextSample& sample) = 0;
};

// Keyed lookup by sample id; unknown ids give 0.
class StubSupportProvider : public SupportProvider {
 public:
  StubSupportProvider() = default;
  explicit StubSupportProvider(std::map<std::string, double> table);
  // JSONL {"id", "value"}; values must lie in [-1, 1].
  static StubSupportProvider from_file(const std::filesystem::path& path);

  SupportSignal query(const TextSample& sample) override;

 private:
  std::map<std::string, double> table_;
};

// POST {endpoint}/support {"prompt"} -> {"verdict": "llm"|"human", "confidence": [0,1]}.
class HttpSupportProvider : public SupportProvider {
 public:
  explicit HttpSupportProvider(SupportConfig config);
  SupportSignal query(const TextSample& sample) override;

 private:
  SupportConfig config_;
};

// Maps a reply body to a signal; malformed replies give the provider-error signal.
SupportSignal parse_support_reply(const std::string& body);

}  // namespace ensemjudge::support
