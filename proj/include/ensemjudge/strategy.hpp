#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ensemjudge/core.hpp"

namespace ensemjudge::strategy {

struct FeatureVector {
  double char_length = 0.0;
  double comma_rate = 0.0;    // per 100 chars
  double newline_rate = 0.0;  // per 100 chars
  double punct_density = 0.0; // fraction of chars in the default punctuation class
  std::optional<double> external_perplexity;

  bool operator==(const FeatureVector&) const = default;
};

FeatureVector extract_features(const TextSample& sample, std::optional<double> perplexity = std::nullopt);

// Per-dimension z-scoring fitted on training features. The perplexity
// dimension is used only when every training vector carried one; a missing
// value at inference maps to the training mean.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;
  bool use_perplexity = false;

  static Standardization fit(std::span<const FeatureVector> features);
  std::vector<double> apply(const FeatureVector& f) const;
  FeatureVector invert(std::span<const double> z) const;

  bool operator==(const Standardization&) const = default;
};

struct ClusterFit {
  std::vector<FeatureVector> centroids;  // raw feature space
  Standardization standardization;
  std::vector<std::size_t> assignment;
  double sse = 0.0;  // in standardized space
  std::size_t iterations = 0;
};

// Seeded k-means++ initialisation then Lloyd iterations until no assignment
// changes or max_iterations. Throws ConfigError when k is 0 or exceeds the
// number of points.
ClusterFit fit_clusters(std::span<const FeatureVector> features, std::size_t k, std::uint64_t seed,
                        std::size_t max_iterations = 100);

// Euclidean in standardized space; ties go to the lowest index.
std::size_t nearest_centroid(const FeatureVector& f, std::span<const FeatureVector> centroids,
                             const Standardization& standardization);

// Half-open [lo, hi); hi = nullopt is unbounded.
struct LengthInterval {
  std::size_t lo = 0;
  std::optional<std::size_t> hi;

  bool contains(std::size_t len) const { return len >= lo && (!hi || len < *hi); }
  bool operator==(const LengthInterval&) const = default;
};

struct CentroidRef {
  std::size_t index = 0;
  bool operator==(const CentroidRef&) const = default;
};

using Predicate = std::variant<LengthInterval, CentroidRef>;

struct Strategy {
  std::string id;
  std::map<std::string, double> weights;  // zero weight = detector not consulted
  double lambda = 0.0;
  double tau = 0.0;
  // Support is consulted when |s - tau| <= band. Defaults to twice the
  // smallest positive weight.
  std::optional<double> uncertainty_band;
  Predicate predicate = LengthInterval{};

  double weight_of(const std::string& detector_id) const;
  double effective_band() const;
  // Weights, lambda, tau and an explicit band multiplied by c > 0.
  Strategy scaled(double c) const;
  void validate() const;  // throws ConfigError

  bool operator==(const Strategy&) const = default;
};

enum class BookMode { LengthBuckets, Clusters };

struct StrategyBook {
  std::vector<std::string> registry;  // detector order; empty = unchecked
  std::vector<Strategy> strategies;
  BookMode mode = BookMode::LengthBuckets;
  std::vector<FeatureVector> centroids;
  std::optional<Standardization> standardization;

  void validate() const;  // throws ConfigError
  StrategyBook scaled(double c) const;

  bool operator==(const StrategyBook&) const = default;
};

// First length interval that matches (length_buckets) or the nearest
// centroid's strategy (clusters).
const Strategy& assign_strategy(const TextSample& sample, const StrategyBook& book,
                                std::optional<double> perplexity = std::nullopt);

struct SearchGrids {
  std::vector<double> weights;
  std::vector<double> lambdas{0.0};
  std::vector<double> taus{0.0};
  // Band used when gating support during the search; nullopt follows
  // Strategy::effective_band's default.
  std::optional<double> uncertainty_band;
};

// Distinct weights appearing in the shipped book.
std::vector<double> default_weight_grid();

using VerdictTable = std::map<std::string, std::vector<DetectorVerdict>>;

// Macro-F1 of a strategy over labeled samples; verdicts are aligned with the
// samples and `support` is empty (all zero) or one value per sample.
double strategy_macro_f1(const Dataset& samples, const VerdictTable& verdicts, const Strategy& strategy,
                         std::span<const double> support = {});

// Greedy coordinate ascent over `detector_order`, from all-zero weights and
// from the best single-detector configuration; the better result is kept.
// Each step takes a grid value only if it strictly improves macro-F1 (ties
// prefer the smaller value). lambda and tau are swept after the weights
// settle. Throws DataError if no positive-weight configuration beats the
// all-zero predictor.
Strategy optimize_weights(const Dataset& samples, std::span<const std::string> detector_order,
                          const VerdictTable& verdicts, const SearchGrids& grids,
                          std::span<const double> support = {}, std::string strategy_id = "fitted");

// The 18 base detectors in reporting order.
const std::vector<std::string>& default_registry();

// Four length-keyed strategies (ext_short < 75 <= short < 150 <= medium
// < 300 <= general) with the shipped weights. Throws ConfigError unless the
// registry has 18 entries.
StrategyBook default_strategy_book(std::span<const std::string> registry = default_registry());

nlohmann::json book_to_json(const StrategyBook& book);
StrategyBook book_from_json(const nlohmann::json& obj);
void save_book(const StrategyBook& book, const std::filesystem::path& path);
StrategyBook load_book(const std::filesystem::path& path);

}  // namespace ensemjudge::strategy
