#include "ensemjudge/rules.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ensemjudge/error.hpp"
#include "ensemjudge/utf8.hpp"

namespace ensemjudge::rules {

using nlohmann::json;

PhraseLexicon::PhraseLexicon(std::vector<PhraseEntry> entries) : entries_(std::move(entries)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& e : entries_) {
    if (e.phrase.empty()) throw ConfigError("lexicon contains an empty phrase");
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      throw ConfigError("lexicon phrase '" + e.phrase + "' has non-positive weight");
    }
    if (!seen.insert(e.phrase).second) throw ConfigError("duplicate lexicon phrase '" + e.phrase + "'");
  }
}

void save_lexicon(const PhraseLexicon& lexicon, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (const auto& e : lexicon.entries()) {
    json obj{{"phrase", e.phrase}, {"polarity", to_int(e.polarity)}, {"weight", e.weight}};
    out << obj.dump() << '\n';
  }
}

PhraseLexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<PhraseEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = json::parse(line);
      entries.push_back({obj.at("phrase").get<std::string>(),
                         label_from_int(obj.at("polarity").get<long long>()),
                         obj.at("weight").get<double>()});
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return PhraseLexicon(std::move(entries));
}

const std::set<char32_t>& default_punctuation() {
  static const std::set<char32_t> kPunct = {
      U'。', U'！', U'？', U'，', U'、', U'；', U'：', U'…', U'～', U'．',
      U'.',  U'!',  U'?',  U',',  U';',  U':',  U'~',
  };
  return kPunct;
}

void RuleConfig::validate() const {
  for (const auto& t : special_tokens) {
    if (t.empty()) throw ConfigError("special token must be nonempty");
  }
  if (!std::isfinite(clause_rate_threshold)) throw ConfigError("clause_rate_threshold must be finite");
  if (consecutive_punct_min_run < 2) throw ConfigError("consecutive_punct_min_run must be >= 2");
}

DetectorVerdict detect_special_token(const TextSample& sample, const RuleConfig& cfg) {
  std::size_t hits = 0;
  for (const auto& token : cfg.special_tokens) hits += utf8::count_occurrences(sample.text(), token);
  return {kSpecialTokenId, hits > 0 ? Label::LLM : Label::Human, static_cast<double>(hits)};
}

DetectorVerdict detect_common_phrase(const TextSample& sample, const RuleConfig& cfg) {
  if (cfg.phrase_lexicon.empty()) throw ConfigError("common_phrase detector needs a nonempty lexicon");
  double sum = 0.0;
  for (const auto& e : cfg.phrase_lexicon.entries()) {
    if (sample.text().find(e.phrase) == std::string::npos) continue;
    sum += e.polarity == Label::LLM ? e.weight : -e.weight;
  }
  return {kCommonPhraseId, sum > 0.0 ? Label::LLM : Label::Human, sum};
}

DetectorVerdict detect_sentence_segment(const TextSample& sample, const RuleConfig& cfg) {
  if (sample.char_length() == 0) return {kSentenceSegmentId, Label::Human, 0.0};
  const std::size_t commas = utf8::count_occurrences(sample.text(), "，") +
                             utf8::count_occurrences(sample.text(), ",");
  const double rate = 100.0 * static_cast<double>(commas) / static_cast<double>(sample.char_length());
  return {kSentenceSegmentId, rate >= cfg.clause_rate_threshold ? Label::Human : Label::LLM, rate};
}

DetectorVerdict detect_consecutive_punctuation(const TextSample& sample, const RuleConfig& cfg) {
  if (sample.char_length() == 0) return {kConsecutivePunctuationId, Label::Human, 0.0};
  const auto scalars = utf8::decode(sample.text());
  std::size_t longest = 0;
  std::size_t run = 0;
  char32_t prev = 0;
  for (char32_t c : scalars) {
    if (!cfg.punct_class.contains(c)) {
      run = 0;
      continue;
    }
    run = (run > 0 && c == prev) ? run + 1 : 1;
    prev = c;
    longest = std::max(longest, run);
  }
  const bool repeated = longest >= static_cast<std::size_t>(cfg.consecutive_punct_min_run);
  return {kConsecutivePunctuationId, repeated ? Label::Human : Label::LLM, static_cast<double>(longest)};
}

PhraseLexicon mine_phrases(const Dataset& train, std::size_t top_k, std::size_t min_len,
                           std::size_t max_len) {
  if (min_len < 1 || min_len > max_len) throw ConfigError("phrase mining needs 1 <= min_len <= max_len");
  if (!train.has_both_labels()) throw DataError("phrase mining needs both labels in the training set");
  if (top_k == 0) return {};

  struct DocFreq {
    std::size_t llm = 0;
    std::size_t human = 0;
  };
  std::unordered_map<std::string, DocFreq> freq;
  std::unordered_set<std::string> in_doc;
  for (const auto& s : train) {
    if (!s.gold_label()) continue;
    const auto scalars = utf8::decode(s.text());
    in_doc.clear();
    for (std::size_t n = min_len; n <= max_len && n <= scalars.size(); ++n) {
      for (std::size_t i = 0; i + n <= scalars.size(); ++i) {
        in_doc.insert(utf8::encode(std::u32string_view(scalars).substr(i, n)));
      }
    }
    const bool llm = *s.gold_label() == Label::LLM;
    for (const auto& gram : in_doc) {
      auto& f = freq[gram];
      (llm ? f.llm : f.human) += 1;
    }
  }

  const auto n_llm = static_cast<double>(train.counts().llm);
  const auto n_human = static_cast<double>(train.counts().human);
  std::vector<PhraseEntry> scored;
  for (const auto& [gram, f] : freq) {
    const double diff = static_cast<double>(f.llm) / n_llm - static_cast<double>(f.human) / n_human;
    if (diff == 0.0) continue;
    scored.push_back({gram, diff > 0.0 ? Label::LLM : Label::Human, std::abs(diff)});
  }
  const auto keep = std::min(top_k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    [](const PhraseEntry& a, const PhraseEntry& b) {
                      if (a.weight != b.weight) return a.weight > b.weight;
                      return a.phrase < b.phrase;
                    });
  scored.resize(keep);
  return PhraseLexicon(std::move(scored));
}

}  // namespace ensemjudge::rules
