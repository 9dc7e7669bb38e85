#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "ensemjudge/core.hpp"

namespace ensemjudge::freq {

enum class TokenizerKind { CharUnigram, CharBigram, ExternalVocab };

const char* tokenizer_kind_name(TokenizerKind kind);
TokenizerKind parse_tokenizer_kind(std::string_view name);

class Tokenizer {
 public:
  explicit Tokenizer(TokenizerKind kind = TokenizerKind::CharUnigram);
  // Longest-match segmentation over `vocab`; unknown spans fall back to
  // single characters.
  static Tokenizer from_vocab(std::vector<std::string> vocab);
  static Tokenizer from_vocab_file(const std::filesystem::path& path);

  TokenizerKind kind() const { return kind_; }
  // Identifies the vocabulary so a table cannot be used with another one;
  // zero for the character tokenizers.
  std::uint64_t fingerprint() const { return fingerprint_; }

  std::vector<std::string> tokenize(std::string_view text) const;

 private:
  TokenizerKind kind_;
  std::unordered_set<std::string> vocab_;
  std::size_t max_token_chars_ = 1;
  std::uint64_t fingerprint_ = 0;
};

enum class AttributionMode { RelativeFrequency, RawCount };

struct TokenFrequencyTable {
  std::map<std::string, std::uint64_t> llm_counts;
  std::map<std::string, std::uint64_t> human_counts;
  std::uint64_t llm_total = 0;
  std::uint64_t human_total = 0;
  double smoothing = 1.0;
  TokenizerKind tokenizer = TokenizerKind::CharUnigram;
  std::uint64_t tokenizer_fingerprint = 0;
  AttributionMode mode = AttributionMode::RelativeFrequency;

  // Distinct tokens seen in either subset.
  std::size_t vocab_size() const;
  void validate() const;  // throws DataError

  bool operator==(const TokenFrequencyTable&) const = default;
};

inline constexpr const char* kCommonTokenId = "common_token";

TokenFrequencyTable build_token_table(const Dataset& train, const Tokenizer& tok, double smoothing = 1.0,
                                      AttributionMode mode = AttributionMode::RelativeFrequency);

// Each token counts for the subset where it is relatively more frequent;
// tokens unseen in both subsets, and exact ties, count for neither.
DetectorVerdict classify_common_token(const TextSample& sample, const TokenFrequencyTable& table,
                                      const Tokenizer& tok);

void save_token_table(const TokenFrequencyTable& table, const std::filesystem::path& path);
TokenFrequencyTable load_token_table(const std::filesystem::path& path);

}  // namespace ensemjudge::freq
