#pragma once

#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ensemjudge/core.hpp"

namespace ensemjudge::scores {

enum class Orientation { HigherIsLlm, LowerIsLlm };
enum class SourceKind { ScoreFile, HttpEndpoint };

const char* orientation_name(Orientation o);
Orientation parse_orientation(std::string_view name);

struct ScoreSource {
  std::string detector_id;
  SourceKind kind = SourceKind::ScoreFile;
  std::string location;  // file path or base URL
  Orientation orientation = Orientation::HigherIsLlm;
};

// Throws ConfigError on empty or repeated detector ids.
void validate_registry(std::span<const ScoreSource> sources);

using ScoreMap = std::map<std::string, double>;

// Score file: JSONL {"id","score"}; extra ids are ignored.
// HTTP: POST {location}/score {"id","text"} -> {"score"}, one request per sample.
// Throws DataError naming missing ids or non-finite scores.
ScoreMap load_scores(const ScoreSource& source, const Dataset& dataset);
ScoreMap parse_score_file(const std::filesystem::path& path);

struct ThresholdBucket {
  std::optional<std::size_t> upper;  // exclusive char-length bound; nullopt = unbounded
  double threshold = 0.0;            // may be +/-inf when one side wins outright

  bool operator==(const ThresholdBucket&) const = default;
};

struct ThresholdProfile {
  std::string detector_id;
  Orientation orientation = Orientation::HigherIsLlm;
  std::vector<ThresholdBucket> buckets;
  std::vector<std::string> warnings;

  void validate() const;  // throws ConfigError
  const ThresholdBucket& bucket_for(std::size_t char_length) const;

  bool operator==(const ThresholdProfile&) const = default;
};

inline const std::vector<std::size_t>& default_bucket_edges() {
  static const std::vector<std::size_t> kEdges{75, 150, 300};
  return kEdges;
}

// Per-length-bucket macro-F1 maximizing threshold over midpoints between
// distinct sorted scores plus the +/-inf sentinels; ties go to the smaller
// threshold. Buckets holding a single class inherit the all-lengths
// threshold and record a warning. Unlabeled samples are ignored.
ThresholdProfile calibrate_thresholds(const ScoreMap& scores, const Dataset& labeled,
                                      std::span<const std::size_t> bucket_edges, Orientation orientation,
                                      std::string detector_id);

struct SweepResult {
  double threshold = 0.0;
  double macro_f1 = 0.0;
};

// The single-bucket sweep; `scores` and `gold` are parallel.
SweepResult sweep_threshold(std::span<const double> scores, std::span<const Label> gold, Orientation orientation);

Label apply_threshold(double score, double threshold, Orientation orientation);

DetectorVerdict score_to_verdict(const TextSample& sample, double score, const ThresholdProfile& profile);

void save_profile(const ThresholdProfile& profile, const std::filesystem::path& path);
ThresholdProfile load_profile(const std::filesystem::path& path);

}  // namespace ensemjudge::scores
