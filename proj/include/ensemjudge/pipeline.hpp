#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ensemjudge/augment.hpp"
#include "ensemjudge/evaluation.hpp"
#include "ensemjudge/rules.hpp"
#include "ensemjudge/scores.hpp"
#include "ensemjudge/strategy.hpp"
#include "ensemjudge/support.hpp"
#include "ensemjudge/token_freq.hpp"
#include "ensemjudge/voting.hpp"

namespace ensemjudge::pipeline {

enum class DetectorKind {
  SpecialToken,
  ConsecutivePunctuation,
  CommonPhrase,
  SentenceSegment,
  CommonToken,
  Score,
};

struct DetectorSpec {
  std::string id;
  DetectorKind kind = DetectorKind::SpecialToken;
  // common_token
  freq::TokenizerKind tokenizer = freq::TokenizerKind::CharUnigram;
  std::filesystem::path vocab;
  double smoothing = 1.0;
  freq::AttributionMode attribution = freq::AttributionMode::RelativeFrequency;
  // score
  scores::ScoreSource source;
};

enum class BookSource { Fit, Default, File };
enum class SupportKind { None, Stub, HttpLlm };
enum class MtKind { None, Stub, Http };

struct RunConfig {
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int llm_label = 1;  // integer that denotes LLM in every file this run reads or writes

  std::filesystem::path train;
  std::filesystem::path input;
  std::filesystem::path artifacts_dir;

  std::vector<DetectorSpec> detectors;
  rules::RuleConfig rules;
  std::size_t phrase_top_k = 200;
  std::size_t phrase_min_len = 2;
  std::size_t phrase_max_len = 6;

  std::vector<std::size_t> calibration_edges = scores::default_bucket_edges();

  BookSource book_source = BookSource::Fit;
  std::filesystem::path book_path;
  strategy::BookMode book_mode = strategy::BookMode::LengthBuckets;
  std::vector<std::size_t> strategy_edges = scores::default_bucket_edges();
  std::size_t clusters_k = 4;
  strategy::SearchGrids grids{strategy::default_weight_grid(), {0.0}, {0.0}, std::nullopt};

  SupportKind support_kind = SupportKind::None;
  std::filesystem::path support_fixture;
  support::SupportConfig support;

  std::vector<voting::OverrideRule> overrides;

  std::filesystem::path augment_input;
  std::vector<augment::Transform> augment_transforms;
  MtKind mt_kind = MtKind::None;
  std::filesystem::path mt_fixture;
  std::string mt_endpoint;

  std::string system_name = "EnsemJudge";
  std::vector<augment::Transform> reliability_transforms;

  std::filesystem::path predictions;
  std::filesystem::path audit;
  std::filesystem::path report;
  std::filesystem::path report_table;
  std::filesystem::path augmented;

  std::vector<std::string> detector_ids() const;
};

// Input paths resolve against the config file's directory, outputs against
// out_dir (default: the same directory). Errors name the offending key path.
RunConfig load_config(const std::filesystem::path& path, const std::optional<std::filesystem::path>& out_dir = {},
                      const std::optional<std::uint64_t>& seed = {});

struct Artifacts {
  rules::PhraseLexicon lexicon;
  std::map<std::string, freq::TokenFrequencyTable> token_tables;
  std::map<std::string, scores::ThresholdProfile> profiles;
  strategy::StrategyBook book;
};

std::filesystem::path lexicon_path(const RunConfig& cfg);
std::filesystem::path token_table_path(const RunConfig& cfg, const std::string& detector_id);
std::filesystem::path profile_path(const RunConfig& cfg, const std::string& detector_id);
std::filesystem::path book_path(const RunConfig& cfg);

// Per sample, one verdict per configured detector in config order.
std::vector<std::vector<DetectorVerdict>> compute_verdicts(const RunConfig& cfg, const Artifacts& artifacts,
                                                           const Dataset& dataset);

std::vector<voting::VoteOutcome> judge_dataset(const RunConfig& cfg, const Artifacts& artifacts,
                                               const Dataset& dataset);

Artifacts load_artifacts(const RunConfig& cfg);

// Each returns human-readable warnings (empty when none).
std::vector<std::string> cmd_calibrate(const RunConfig& cfg);
std::vector<std::string> cmd_fit(const RunConfig& cfg);
void cmd_predict(const RunConfig& cfg);
eval::EvaluationReport cmd_eval(const RunConfig& cfg);
void cmd_augment(const RunConfig& cfg);

}  // namespace ensemjudge::pipeline
