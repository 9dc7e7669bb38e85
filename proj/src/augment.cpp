#include "ensemjudge/augment.hpp"

#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "ensemjudge/error.hpp"
#include "ensemjudge/http.hpp"
#include "ensemjudge/random.hpp"
#include "ensemjudge/utf8.hpp"

namespace ensemjudge::augment {

using nlohmann::json;

std::string transform_kind(const Transform& t) {
  struct Visitor {
    std::string operator()(const Excerpt&) const { return "excerpt"; }
    std::string operator()(const BackTranslate&) const { return "back_translate"; }
    std::string operator()(const Identity&) const { return "identity"; }
  };
  return std::visit(Visitor{}, t);
}

TextSample excerpt(const TextSample& sample, std::size_t target_len, std::uint64_t seed) {
  if (target_len < 1) throw ConfigError("excerpt target_len must be >= 1");
  std::string id = sample.id() + "#ex" + std::to_string(target_len);
  if (sample.char_length() <= target_len) {
    return TextSample(std::move(id), sample.text(), sample.gold_label(), sample.subset());
  }
  const auto scalars = utf8::decode(sample.text());
  Rng rng(seed ^ fnv1a(sample.id()));
  const auto offset = rng.uniform_index(scalars.size() - target_len + 1);
  return TextSample(std::move(id), utf8::encode(std::u32string_view(scalars).substr(offset, target_len)),
                    sample.gold_label(), sample.subset());
}

StubMtClient StubMtClient::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open MT stub fixture '" + path.string() + "'");
  std::map<std::string, std::string> mapping;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = json::parse(line);
      mapping[obj.at("in").get<std::string>()] = obj.at("out").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return StubMtClient(std::move(mapping));
}

std::string StubMtClient::translate(const std::string& text, const std::string&, const std::string&) {
  auto it = mapping_.find(text);
  return it == mapping_.end() ? text : it->second;
}

HttpMtClient::HttpMtClient(std::string endpoint) : endpoint_(std::move(endpoint)) {
  if (endpoint_.empty()) throw ConfigError("MT client needs an endpoint");
}

std::string HttpMtClient::translate(const std::string& text, const std::string& src, const std::string& tgt) {
  const auto reply = http::post_json(endpoint_, "/translate", json{{"text", text}, {"src", src}, {"tgt", tgt}});
  auto it = reply.find("text");
  if (it == reply.end() || !it->is_string()) throw AdapterError("MT reply has no string field 'text'");
  return it->get<std::string>();
}

TextSample back_translate(const TextSample& sample, const BackTranslate& params, MtClient& mt) {
  const auto pivot = mt.translate(sample.text(), params.source_language, params.pivot_language);
  auto back = mt.translate(pivot, params.pivot_language, params.source_language);
  return TextSample(sample.id() + "#bt" + params.pivot_language, std::move(back), sample.gold_label(),
                    sample.subset());
}

TextSample apply_transform(const TextSample& sample, const Transform& t, MtClient* mt) {
  if (const auto* ex = std::get_if<Excerpt>(&t)) return excerpt(sample, ex->target_len, ex->seed);
  if (const auto* bt = std::get_if<BackTranslate>(&t)) {
    if (mt == nullptr) throw ConfigError("back_translate transform needs an MT client");
    return back_translate(sample, *bt, *mt);
  }
  return TextSample(sample.id() + "#id", sample.text(), sample.gold_label(), sample.subset());
}

Dataset build_adversarial_set(const Dataset& dataset, std::span<const Transform> transforms, MtClient* mt) {
  if (transforms.empty()) throw ConfigError("adversarial set needs at least one transform");
  std::vector<TextSample> out;
  out.reserve(dataset.size() * transforms.size());
  std::unordered_set<std::string> ids;
  for (std::size_t ti = 0; ti < transforms.size(); ++ti) {
    const auto tag = transform_kind(transforms[ti]);
    for (const auto& s : dataset) {
      auto moved = apply_transform(s, transforms[ti], mt);
      std::string id = moved.id();
      // Repeated transforms of one kind yield equal suffixes.
      if (!ids.insert(id).second) {
        id += "@t" + std::to_string(ti);
        ids.insert(id);
      }
      out.emplace_back(std::move(id), moved.text(), moved.gold_label(), tag);
    }
  }
  return Dataset(std::move(out));
}

}  // namespace ensemjudge::augment
