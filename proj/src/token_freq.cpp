#include "ensemjudge/token_freq.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ensemjudge/error.hpp"
#include "ensemjudge/utf8.hpp"

namespace ensemjudge::freq {

using nlohmann::json;

const char* tokenizer_kind_name(TokenizerKind kind) {
  switch (kind) {
    case TokenizerKind::CharUnigram: return "char_unigram";
    case TokenizerKind::CharBigram: return "char_bigram";
    case TokenizerKind::ExternalVocab: return "external_vocab";
  }
  return "?";
}

TokenizerKind parse_tokenizer_kind(std::string_view name) {
  if (name == "char_unigram") return TokenizerKind::CharUnigram;
  if (name == "char_bigram") return TokenizerKind::CharBigram;
  if (name == "external_vocab") return TokenizerKind::ExternalVocab;
  throw ConfigError("unknown tokenizer kind '" + std::string(name) + "'");
}

Tokenizer::Tokenizer(TokenizerKind kind) : kind_(kind) {
  if (kind == TokenizerKind::ExternalVocab) {
    throw ConfigError("external_vocab tokenizer needs a vocabulary");
  }
}

Tokenizer Tokenizer::from_vocab(std::vector<std::string> vocab) {
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  std::erase(vocab, std::string{});
  if (vocab.empty()) throw ConfigError("external_vocab tokenizer needs a nonempty vocabulary");
  Tokenizer tok;
  tok.kind_ = TokenizerKind::ExternalVocab;
  // FNV-1a over the sorted vocabulary.
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : vocab) {
    tok.max_token_chars_ = std::max(tok.max_token_chars_, utf8::scalar_count(t));
    for (unsigned char c : t) h = (h ^ c) * 1099511628211ULL;
    h = (h ^ 0xFFu) * 1099511628211ULL;
    tok.vocab_.insert(t);
  }
  tok.fingerprint_ = h;
  return tok;
}

Tokenizer Tokenizer::from_vocab_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open vocabulary file '" + path.string() + "'");
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return from_vocab(std::move(vocab));
}

std::vector<std::string> Tokenizer::tokenize(std::string_view text) const {
  const auto scalars = utf8::decode(text);
  const std::u32string_view view(scalars);
  std::vector<std::string> tokens;
  switch (kind_) {
    case TokenizerKind::CharUnigram:
      tokens.reserve(scalars.size());
      for (char32_t c : scalars) tokens.push_back(utf8::encode(c));
      break;
    case TokenizerKind::CharBigram:
      if (scalars.size() == 1) {
        tokens.push_back(utf8::encode(scalars[0]));
        break;
      }
      for (std::size_t i = 0; i + 1 < scalars.size(); ++i) tokens.push_back(utf8::encode(view.substr(i, 2)));
      break;
    case TokenizerKind::ExternalVocab:
      for (std::size_t i = 0; i < scalars.size();) {
        std::size_t len = std::min(max_token_chars_, scalars.size() - i);
        for (; len > 1; --len) {
          if (vocab_.contains(utf8::encode(view.substr(i, len)))) break;
        }
        tokens.push_back(utf8::encode(view.substr(i, len)));
        i += len;
      }
      break;
  }
  return tokens;
}

std::size_t TokenFrequencyTable::vocab_size() const {
  std::size_t n = llm_counts.size();
  for (const auto& [tok, count] : human_counts) {
    if (!llm_counts.contains(tok)) ++n;
  }
  return n;
}

void TokenFrequencyTable::validate() const {
  if (!(smoothing > 0.0) || !std::isfinite(smoothing)) throw DataError("token table smoothing must be > 0");
  std::uint64_t l = 0, h = 0;
  for (const auto& [tok, c] : llm_counts) l += c;
  for (const auto& [tok, c] : human_counts) h += c;
  if (l != llm_total || h != human_total) throw DataError("token table totals do not match its counts");
}

TokenFrequencyTable build_token_table(const Dataset& train, const Tokenizer& tok, double smoothing,
                                      AttributionMode mode) {
  if (!train.has_both_labels()) throw DataError("token table needs both labels in the training set");
  TokenFrequencyTable table;
  table.smoothing = smoothing;
  table.tokenizer = tok.kind();
  table.tokenizer_fingerprint = tok.fingerprint();
  table.mode = mode;
  for (const auto& s : train) {
    if (!s.gold_label()) continue;
    const bool llm = *s.gold_label() == Label::LLM;
    auto& counts = llm ? table.llm_counts : table.human_counts;
    auto& total = llm ? table.llm_total : table.human_total;
    for (auto& t : tok.tokenize(s.text())) {
      ++counts[std::move(t)];
      ++total;
    }
  }
  table.validate();
  return table;
}

DetectorVerdict classify_common_token(const TextSample& sample, const TokenFrequencyTable& table,
                                      const Tokenizer& tok) {
  if (tok.kind() != table.tokenizer || tok.fingerprint() != table.tokenizer_fingerprint) {
    throw ConfigError(std::string("token table was built with tokenizer '") +
                      tokenizer_kind_name(table.tokenizer) + "', classifier uses '" +
                      tokenizer_kind_name(tok.kind()) + "' or a different vocabulary");
  }
  const auto lookup = [](const std::map<std::string, std::uint64_t>& m, const std::string& t) {
    auto it = m.find(t);
    return it == m.end() ? std::uint64_t{0} : it->second;
  };
  const double v = static_cast<double>(table.vocab_size());
  const double llm_denom = static_cast<double>(table.llm_total) + table.smoothing * v;
  const double human_denom = static_cast<double>(table.human_total) + table.smoothing * v;

  long long llm_votes = 0;
  long long human_votes = 0;
  for (const auto& t : tok.tokenize(sample.text())) {
    const auto cl = lookup(table.llm_counts, t);
    const auto ch = lookup(table.human_counts, t);
    if (cl == 0 && ch == 0) continue;
    double pl = static_cast<double>(cl);
    double ph = static_cast<double>(ch);
    if (table.mode == AttributionMode::RelativeFrequency) {
      pl = (pl + table.smoothing) / llm_denom;
      ph = (ph + table.smoothing) / human_denom;
    }
    if (pl > ph) {
      ++llm_votes;
    } else if (ph > pl) {
      ++human_votes;
    }
  }
  const long long diff = llm_votes - human_votes;
  return {kCommonTokenId, diff > 0 ? Label::LLM : Label::Human, static_cast<double>(diff)};
}

void save_token_table(const TokenFrequencyTable& table, const std::filesystem::path& path) {
  json obj;
  obj["tokenizer"] = tokenizer_kind_name(table.tokenizer);
  obj["tokenizer_fingerprint"] = table.tokenizer_fingerprint;
  obj["mode"] = table.mode == AttributionMode::RawCount ? "raw_count" : "relative_frequency";
  obj["smoothing"] = table.smoothing;
  obj["llm_total"] = table.llm_total;
  obj["human_total"] = table.human_total;
  obj["llm_counts"] = table.llm_counts;
  obj["human_counts"] = table.human_counts;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << obj.dump(1) << '\n';
}

TokenFrequencyTable load_token_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  TokenFrequencyTable table;
  try {
    const auto obj = json::parse(in);
    table.tokenizer = parse_tokenizer_kind(obj.at("tokenizer").get<std::string>());
    table.tokenizer_fingerprint = obj.value("tokenizer_fingerprint", std::uint64_t{0});
    const auto mode = obj.value("mode", std::string("relative_frequency"));
    if (mode == "raw_count") {
      table.mode = AttributionMode::RawCount;
    } else if (mode == "relative_frequency") {
      table.mode = AttributionMode::RelativeFrequency;
    } else {
      throw DataError("unknown attribution mode '" + mode + "'");
    }
    table.smoothing = obj.at("smoothing").get<double>();
    table.llm_total = obj.at("llm_total").get<std::uint64_t>();
    table.human_total = obj.at("human_total").get<std::uint64_t>();
    table.llm_counts = obj.at("llm_counts").get<std::map<std::string, std::uint64_t>>();
    table.human_counts = obj.at("human_counts").get<std::map<std::string, std::uint64_t>>();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  table.validate();
  return table;
}

}  // namespace ensemjudge::freq
