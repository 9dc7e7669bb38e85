#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "ensemjudge/core.hpp"

namespace ensemjudge::rules {

struct PhraseEntry {
  std::string phrase;
  Label polarity = Label::LLM;
  double weight = 1.0;

  bool operator==(const PhraseEntry&) const = default;
};

class PhraseLexicon {
 public:
  PhraseLexicon() = default;
  // Throws ConfigError on empty or duplicate phrases and non-positive weights.
  explicit PhraseLexicon(std::vector<PhraseEntry> entries);

  const std::vector<PhraseEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  bool operator==(const PhraseLexicon&) const = default;

 private:
  std::vector<PhraseEntry> entries_;
};

// JSONL, one {"phrase", "polarity", "weight"} per line.
void save_lexicon(const PhraseLexicon& lexicon, const std::filesystem::path& path);
PhraseLexicon load_lexicon(const std::filesystem::path& path);

// Full-width and ASCII sentence punctuation.
const std::set<char32_t>& default_punctuation();

struct RuleConfig {
  std::vector<std::string> special_tokens{"\n\n"};
  PhraseLexicon phrase_lexicon;
  double clause_rate_threshold = 4.0;  // commas per 100 chars
  int consecutive_punct_min_run = 2;
  std::set<char32_t> punct_class = default_punctuation();

  void validate() const;  // throws ConfigError
};

inline constexpr const char* kSpecialTokenId = "special_token";
inline constexpr const char* kConsecutivePunctuationId = "consecutive_punctuation";
inline constexpr const char* kCommonPhraseId = "common_phrase";
inline constexpr const char* kSentenceSegmentId = "sentence_segment";

// Every detector returns Human with raw score 0 on empty text.

DetectorVerdict detect_special_token(const TextSample& sample, const RuleConfig& cfg);
DetectorVerdict detect_common_phrase(const TextSample& sample, const RuleConfig& cfg);
DetectorVerdict detect_sentence_segment(const TextSample& sample, const RuleConfig& cfg);
DetectorVerdict detect_consecutive_punctuation(const TextSample& sample, const RuleConfig& cfg);

// Character n-grams in [min_len, max_len] scored by the absolute difference
// of their document frequency in the LLM and Human subsets. Zero-score
// n-grams are dropped; ties order by phrase bytes.
PhraseLexicon mine_phrases(const Dataset& train, std::size_t top_k, std::size_t min_len = 2,
                           std::size_t max_len = 6);

}  // namespace ensemjudge::rules
