#include "ensemjudge/support.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ensemjudge/error.hpp"
#include "ensemjudge/http.hpp"

namespace ensemjudge::support {

using nlohmann::json;

namespace {

const std::string kExamplesSlot = "{examples}";
const std::string kInputSlot = "{input}";

SupportSignal provider_error() { return {0.0, std::string(kProviderError)}; }

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::string SupportConfig::default_prompt_template() {
  return "判断下面的文本是由大语言模型生成（或经过机器回译改写），还是由人类撰写。\n"
         "只输出 JSON：{\"verdict\": \"llm\" 或 \"human\", \"confidence\": 0 到 1 之间的数}。\n\n"
         "{examples}"
         "文本：\n{input}\n答案：";
}

void SupportConfig::validate() const {
  if (kind == ProviderKind::HttpLlm) {
    if (endpoint.empty()) throw ConfigError("http_llm support provider needs an endpoint");
    if (demonstrations.empty()) throw ConfigError("http_llm support provider needs demonstrations");
  }
  if (prompt_template.find(kExamplesSlot) == std::string::npos) {
    throw ConfigError("prompt template is missing the {examples} slot");
  }
  if (prompt_template.find(kInputSlot) == std::string::npos) {
    throw ConfigError("prompt template is missing the {input} slot");
  }
}

std::vector<Demonstration> load_demonstrations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open demonstrations '" + path.string() + "'");
  std::vector<Demonstration> demos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = json::parse(line);
      demos.push_back({obj.at("text").get<std::string>(), label_from_int(obj.at("label").get<long long>())});
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return demos;
}

std::string build_prompt(const SupportConfig& config, const TextSample& sample) {
  if (config.prompt_template.find(kExamplesSlot) == std::string::npos) {
    throw ConfigError("prompt template is missing the {examples} slot");
  }
  if (config.prompt_template.find(kInputSlot) == std::string::npos) {
    throw ConfigError("prompt template is missing the {input} slot");
  }
  std::string examples;
  for (const auto& d : config.demonstrations) {
    examples += "文本：\n" + d.text + "\n答案：{\"verdict\": \"" + label_name(d.label) + "\", \"confidence\": 1.0}\n\n";
  }
  // Fill {input} last so slot-like text inside demonstrations stays literal.
  std::string prompt = config.prompt_template;
  const auto input_pos = prompt.find(kInputSlot);
  std::string head = prompt.substr(0, input_pos);
  std::string tail = prompt.substr(input_pos + kInputSlot.size());
  replace_all(head, kExamplesSlot, examples);
  replace_all(tail, kExamplesSlot, examples);
  return head + sample.text() + tail;
}

StubSupportProvider::StubSupportProvider(std::map<std::string, double> table) : table_(std::move(table)) {
  for (const auto& [id, v] : table_) {
    if (!(v >= -1.0 && v <= 1.0)) throw ConfigError("support stub value for '" + id + "' is outside [-1, 1]");
  }
}

StubSupportProvider StubSupportProvider::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open support stub fixture '" + path.string() + "'");
  std::map<std::string, double> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = json::parse(line);
      table[obj.at("id").get<std::string>()] = obj.at("value").get<double>();
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return StubSupportProvider(std::move(table));
}

SupportSignal StubSupportProvider::query(const TextSample& sample) {
  auto it = table_.find(sample.id());
  return {it == table_.end() ? 0.0 : it->second, std::string("stub")};
}

HttpSupportProvider::HttpSupportProvider(SupportConfig config) : config_(std::move(config)) {
  config_.kind = ProviderKind::HttpLlm;
  config_.validate();
}

SupportSignal parse_support_reply(const std::string& body) {
  try {
    const auto obj = json::parse(body);
    const auto verdict = obj.at("verdict").get<std::string>();
    const double confidence = obj.at("confidence").get<double>();
    if (!(confidence >= 0.0 && confidence <= 1.0)) return provider_error();
    if (verdict == "llm") return {confidence, verdict};
    if (verdict == "human") return {-confidence, verdict};
  } catch (const json::exception&) {
  }
  return provider_error();
}

SupportSignal HttpSupportProvider::query(const TextSample& sample) {
  try {
    const auto reply = http::post_json(config_.endpoint, "/support", json{{"prompt", build_prompt(config_, sample)}});
    return parse_support_reply(reply.dump());
  } catch (const Error&) {
    return provider_error();
  }
}

}  // namespace ensemjudge::support
