#include "ensemjudge/strategy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "ensemjudge/error.hpp"
#include "ensemjudge/evaluation.hpp"
#include "ensemjudge/random.hpp"
#include "ensemjudge/rules.hpp"
#include "ensemjudge/utf8.hpp"
#include "ensemjudge/voting.hpp"

namespace ensemjudge::strategy {

using nlohmann::json;

FeatureVector extract_features(const TextSample& sample, std::optional<double> perplexity) {
  FeatureVector f;
  f.external_perplexity = perplexity;
  if (sample.char_length() == 0) return f;
  const auto scalars = utf8::decode(sample.text());
  const auto& punct = rules::default_punctuation();
  std::size_t commas = 0, newlines = 0, puncts = 0;
  for (char32_t c : scalars) {
    if (c == U'，' || c == U',') ++commas;
    if (c == U'\n') ++newlines;
    if (punct.contains(c)) ++puncts;
  }
  const auto n = static_cast<double>(scalars.size());
  f.char_length = n;
  f.comma_rate = 100.0 * static_cast<double>(commas) / n;
  f.newline_rate = 100.0 * static_cast<double>(newlines) / n;
  f.punct_density = static_cast<double>(puncts) / n;
  return f;
}

namespace {

std::vector<double> raw_dims(const FeatureVector& f, bool with_perplexity) {
  std::vector<double> v{f.char_length, f.comma_rate, f.newline_rate, f.punct_density};
  if (with_perplexity) v.push_back(f.external_perplexity.value_or(std::numeric_limits<double>::quiet_NaN()));
  return v;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

}  // namespace

Standardization Standardization::fit(std::span<const FeatureVector> features) {
  if (features.empty()) throw DataError("cannot standardize an empty feature set");
  Standardization st;
  st.use_perplexity = std::all_of(features.begin(), features.end(),
                                  [](const FeatureVector& f) { return f.external_perplexity.has_value(); });
  const std::size_t dims = st.use_perplexity ? 5 : 4;
  st.mean.assign(dims, 0.0);
  st.scale.assign(dims, 0.0);
  for (const auto& f : features) {
    const auto v = raw_dims(f, st.use_perplexity);
    for (std::size_t d = 0; d < dims; ++d) st.mean[d] += v[d];
  }
  const auto n = static_cast<double>(features.size());
  for (auto& m : st.mean) m /= n;
  for (const auto& f : features) {
    const auto v = raw_dims(f, st.use_perplexity);
    for (std::size_t d = 0; d < dims; ++d) st.scale[d] += (v[d] - st.mean[d]) * (v[d] - st.mean[d]);
  }
  for (auto& s : st.scale) {
    s = std::sqrt(s / n);
    if (!(s > 0.0)) s = 1.0;  // constant dimension
  }
  return st;
}

std::vector<double> Standardization::apply(const FeatureVector& f) const {
  auto v = raw_dims(f, use_perplexity);
  for (std::size_t d = 0; d < v.size(); ++d) v[d] = std::isnan(v[d]) ? 0.0 : (v[d] - mean[d]) / scale[d];
  return v;
}

FeatureVector Standardization::invert(std::span<const double> z) const {
  std::array<double, 5> raw{};
  for (std::size_t d = 0; d < z.size(); ++d) raw[d] = z[d] * scale[d] + mean[d];
  FeatureVector f{raw[0], raw[1], raw[2], raw[3], std::nullopt};
  if (use_perplexity) f.external_perplexity = raw[4];
  return f;
}

ClusterFit fit_clusters(std::span<const FeatureVector> features, std::size_t k, std::uint64_t seed,
                        std::size_t max_iterations) {
  if (k == 0) throw ConfigError("k must be >= 1");
  if (k > features.size()) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds the number of points (" +
                      std::to_string(features.size()) + ")");
  }
  ClusterFit fit;
  fit.standardization = Standardization::fit(features);
  std::vector<std::vector<double>> points;
  points.reserve(features.size());
  for (const auto& f : features) points.push_back(fit.standardization.apply(f));
  const std::size_t n = points.size();
  const std::size_t dims = points[0].size();

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<std::vector<double>> centers;
  centers.push_back(points[rng.uniform_index(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i], centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (acc > target && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
      while (d2[pick] == 0.0) --pick;  // rounding at the tail
    } else {
      pick = rng.uniform_index(n);
    }
    centers.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
  }

  const auto nearest = [&](const std::vector<double>& p) {
    std::size_t best = 0;
    double best_d = squared_distance(p, centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const double d = squared_distance(p, centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    return best;
  };

  fit.assignment.assign(n, k);  // k = unassigned
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = nearest(points[i]);
      if (c != fit.assignment[i]) {
        fit.assignment[i] = c;
        changed = true;
      }
    }
    fit.iterations = iter + 1;
    if (!changed) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(dims, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[fit.assignment[i]];
      for (std::size_t d = 0; d < dims; ++d) sums[fit.assignment[i]][d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its center
      for (std::size_t d = 0; d < dims; ++d) centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }
  }

  fit.sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) fit.sse += squared_distance(points[i], centers[fit.assignment[i]]);
  for (const auto& c : centers) fit.centroids.push_back(fit.standardization.invert(c));
  return fit;
}

std::size_t nearest_centroid(const FeatureVector& f, std::span<const FeatureVector> centroids,
                             const Standardization& standardization) {
  if (centroids.empty()) throw ConfigError("no centroids");
  const auto p = standardization.apply(f);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(p, standardization.apply(centroids[c]));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double Strategy::weight_of(const std::string& detector_id) const {
  auto it = weights.find(detector_id);
  return it == weights.end() ? 0.0 : it->second;
}

double Strategy::effective_band() const {
  if (uncertainty_band) return *uncertainty_band;
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& [id, w] : weights) {
    if (w > 0.0) smallest = std::min(smallest, w);
  }
  return std::isfinite(smallest) ? 2.0 * smallest : 0.0;
}

Strategy Strategy::scaled(double c) const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("scale factor must be finite and > 0");
  Strategy s = *this;
  for (auto& [id, w] : s.weights) w *= c;
  s.lambda *= c;
  s.tau *= c;
  if (s.uncertainty_band) *s.uncertainty_band *= c;
  return s;
}

void Strategy::validate() const {
  if (id.empty()) throw ConfigError("strategy with empty id");
  bool positive = false;
  for (const auto& [det, w] : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("strategy '" + id + "': weight of '" + det + "' must be >= 0");
    positive = positive || w > 0.0;
  }
  if (!positive) throw ConfigError("strategy '" + id + "' has no positive weight");
  if (!std::isfinite(lambda) || lambda < 0.0) throw ConfigError("strategy '" + id + "': lambda must be >= 0");
  if (!std::isfinite(tau)) throw ConfigError("strategy '" + id + "': tau must be finite");
  if (uncertainty_band && !(*uncertainty_band >= 0.0 && std::isfinite(*uncertainty_band))) {
    throw ConfigError("strategy '" + id + "': uncertainty band must be finite and >= 0");
  }
  if (const auto* li = std::get_if<LengthInterval>(&predicate); li && li->hi && *li->hi <= li->lo) {
    throw ConfigError("strategy '" + id + "': empty length interval");
  }
}

void StrategyBook::validate() const {
  if (strategies.empty()) throw ConfigError("strategy book is empty");
  std::set<std::string> ids;
  for (const auto& s : strategies) {
    s.validate();
    if (!ids.insert(s.id).second) throw ConfigError("duplicate strategy id '" + s.id + "'");
    if (!registry.empty()) {
      for (const auto& [det, w] : s.weights) {
        if (std::find(registry.begin(), registry.end(), det) == registry.end()) {
          throw ConfigError("strategy '" + s.id + "' weights unknown detector '" + det + "'");
        }
      }
    }
  }
  if (mode == BookMode::LengthBuckets) {
    std::vector<LengthInterval> intervals;
    for (const auto& s : strategies) {
      const auto* li = std::get_if<LengthInterval>(&s.predicate);
      if (li == nullptr) throw ConfigError("strategy '" + s.id + "' needs a length interval in length_buckets mode");
      intervals.push_back(*li);
    }
    std::sort(intervals.begin(), intervals.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    std::optional<std::size_t> reach = 0;  // nullopt = covered to infinity
    for (const auto& iv : intervals) {
      if (!reach) break;
      if (iv.lo > *reach) throw ConfigError("length intervals leave lengths [" + std::to_string(*reach) + ", " +
                                            std::to_string(iv.lo) + ") unassigned");
      if (!iv.hi) {
        reach.reset();
      } else {
        reach = std::max(*reach, *iv.hi);
      }
    }
    if (reach) throw ConfigError("no catch-all strategy covers lengths >= " + std::to_string(*reach));
  } else {
    if (centroids.empty() || !standardization) throw ConfigError("clusters mode needs centroids and standardization");
    std::vector<int> used(centroids.size(), 0);
    for (const auto& s : strategies) {
      const auto* ref = std::get_if<CentroidRef>(&s.predicate);
      if (ref == nullptr) throw ConfigError("strategy '" + s.id + "' needs a centroid in clusters mode");
      if (ref->index >= centroids.size()) throw ConfigError("strategy '" + s.id + "' names a missing centroid");
      ++used[ref->index];
    }
    for (std::size_t c = 0; c < used.size(); ++c) {
      if (used[c] != 1) throw ConfigError("centroid " + std::to_string(c) + " must map to exactly one strategy");
    }
  }
}

StrategyBook StrategyBook::scaled(double c) const {
  StrategyBook b = *this;
  for (auto& s : b.strategies) s = s.scaled(c);
  return b;
}

const Strategy& assign_strategy(const TextSample& sample, const StrategyBook& book, std::optional<double> perplexity) {
  if (book.mode == BookMode::LengthBuckets) {
    for (const auto& s : book.strategies) {
      if (const auto* li = std::get_if<LengthInterval>(&s.predicate); li && li->contains(sample.char_length())) {
        return s;
      }
    }
    throw ConfigError("no strategy covers length " + std::to_string(sample.char_length()));
  }
  if (!book.standardization) throw ConfigError("clusters mode needs standardization");
  const auto c = nearest_centroid(extract_features(sample, perplexity), book.centroids, *book.standardization);
  for (const auto& s : book.strategies) {
    if (const auto* ref = std::get_if<CentroidRef>(&s.predicate); ref && ref->index == c) return s;
  }
  throw ConfigError("no strategy for centroid " + std::to_string(c));
}

std::vector<double> default_weight_grid() { return {0, 10, 35, 40, 50, 55, 60, 70, 75, 80, 85, 90, 95, 100, 400}; }

namespace {

constexpr double kEps = 1e-12;

// Dense votes[detector][sample] for the detectors in search order.
struct VoteMatrix {
  std::vector<std::vector<int>> votes;
  std::vector<Label> gold;
  std::vector<double> support;
};

VoteMatrix build_matrix(const Dataset& samples, std::span<const std::string> order, const VerdictTable& verdicts,
                        std::span<const double> support) {
  VoteMatrix m;
  for (const auto& s : samples) {
    if (!s.gold_label()) throw DataError("sample '" + s.id() + "' has no gold label");
    m.gold.push_back(*s.gold_label());
  }
  if (!support.empty() && support.size() != samples.size()) {
    throw DataError("support values do not align with the samples");
  }
  m.support.assign(samples.size(), 0.0);
  std::copy(support.begin(), support.end(), m.support.begin());
  for (const auto& id : order) {
    auto it = verdicts.find(id);
    if (it == verdicts.end()) throw DataError("no verdicts from detector '" + id + "'");
    if (it->second.size() != samples.size()) {
      throw DataError("detector '" + id + "' has " + std::to_string(it->second.size()) + " verdicts for " +
                      std::to_string(samples.size()) + " samples");
    }
    std::vector<int> row;
    row.reserve(samples.size());
    for (const auto& v : it->second) row.push_back(v.vote());
    m.votes.push_back(std::move(row));
  }
  return m;
}

struct SearchState {
  std::vector<double> weights;
  double lambda = 0.0;
  double tau = 0.0;
  double f1 = 0.0;
};

class Search {
 public:
  Search(const VoteMatrix& m, const SearchGrids& grids, std::optional<double> fixed_band = std::nullopt)
      : m_(m), grids_(grids), fixed_band_(fixed_band) {}

  // Support enters only inside the uncertainty band, as at inference.
  double score_f1(const std::vector<double>& scores, double lambda, double tau, double band) const {
    eval::ConfusionMatrix cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double d = lambda > 0.0 && std::abs(scores[i] - tau) <= band ? m_.support[i] : 0.0;
      cm.add(voting::decide(scores[i], d, lambda, tau), m_.gold[i]);
    }
    return eval::macro_f1(cm);
  }

  double band_of(const std::vector<double>& weights) const {
    if (fixed_band_) return *fixed_band_;
    double smallest = std::numeric_limits<double>::infinity();
    for (double w : weights) {
      if (w > 0.0) smallest = std::min(smallest, w);
    }
    return std::isfinite(smallest) ? 2.0 * smallest : 0.0;
  }

  std::vector<double> scores_of(const std::vector<double>& weights) const {
    std::vector<double> s(m_.gold.size(), 0.0);
    for (std::size_t d = 0; d < weights.size(); ++d) {
      if (weights[d] == 0.0) continue;
      for (std::size_t i = 0; i < s.size(); ++i) s[i] += weights[d] * m_.votes[d][i];
    }
    return s;
  }

  void evaluate(SearchState& st) const {
    st.f1 = score_f1(scores_of(st.weights), st.lambda, st.tau, band_of(st.weights));
  }

  // Returns true if any coordinate moved.
  bool ascend_weights(SearchState& st) const {
    auto scores = scores_of(st.weights);
    bool moved_any = false;
    for (bool moved = true; moved;) {
      moved = false;
      for (std::size_t d = 0; d < st.weights.size(); ++d) {
        double best_w = st.weights[d];
        double best_f = st.f1;
        for (double g : grids_.weights) {
          if (g == st.weights[d]) continue;
          auto trial = scores;
          for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += (g - st.weights[d]) * m_.votes[d][i];
          auto trial_weights = st.weights;
          trial_weights[d] = g;
          const double f = score_f1(trial, st.lambda, st.tau, band_of(trial_weights));
          if (f > best_f + kEps) {
            best_f = f;
            best_w = g;
          }
        }
        if (best_w != st.weights[d]) {
          for (std::size_t i = 0; i < scores.size(); ++i) scores[i] += (best_w - st.weights[d]) * m_.votes[d][i];
          st.weights[d] = best_w;
          st.f1 = best_f;
          moved = moved_any = true;
        }
      }
    }
    return moved_any;
  }

  bool sweep_param(SearchState& st, double SearchState::*param, const std::vector<double>& grid) const {
    const auto scores = scores_of(st.weights);
    const double band = band_of(st.weights);
    double best_v = st.*param;
    double best_f = st.f1;
    for (double g : grid) {
      SearchState trial = st;
      trial.*param = g;
      const double f = score_f1(scores, trial.lambda, trial.tau, band);
      if (f > best_f + kEps) {
        best_f = f;
        best_v = g;
      }
    }
    if (best_v == st.*param) return false;
    st.*param = best_v;
    st.f1 = best_f;
    return true;
  }

  void ascend(SearchState& st) const {
    evaluate(st);
    for (bool moved = true; moved;) {
      ascend_weights(st);
      moved = sweep_param(st, &SearchState::lambda, grids_.lambdas);
      moved = sweep_param(st, &SearchState::tau, grids_.taus) || moved;
    }
  }

 private:
  const VoteMatrix& m_;
  const SearchGrids& grids_;
  std::optional<double> fixed_band_;
};

std::vector<double> sorted_grid(std::vector<double> g, const char* what) {
  for (double v : g) {
    if (!std::isfinite(v)) throw ConfigError(std::string(what) + " grid has a non-finite value");
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

double start_value(const std::vector<double>& grid) {
  if (grid.empty()) return 0.0;
  return *std::min_element(grid.begin(), grid.end(),
                           [](double a, double b) { return std::abs(a) < std::abs(b); });
}

}  // namespace

double strategy_macro_f1(const Dataset& samples, const VerdictTable& verdicts, const Strategy& strategy,
                         std::span<const double> support) {
  std::vector<std::string> order;
  std::vector<double> weights;
  for (const auto& [id, w] : strategy.weights) {
    if (w > 0.0) {
      order.push_back(id);
      weights.push_back(w);
    }
  }
  const auto m = build_matrix(samples, order, verdicts, support);
  const SearchGrids none;
  const Search search(m, none);
  return search.score_f1(search.scores_of(weights), strategy.lambda, strategy.tau, strategy.effective_band());
}

Strategy optimize_weights(const Dataset& samples, std::span<const std::string> detector_order,
                          const VerdictTable& verdicts, const SearchGrids& grids_in, std::span<const double> support,
                          std::string strategy_id) {
  if (samples.empty()) throw DataError("weight search on an empty sample set");
  if (detector_order.empty()) throw ConfigError("weight search needs at least one detector");
  SearchGrids grids;
  grids.weights = sorted_grid(grids_in.weights, "weight");
  grids.lambdas = sorted_grid(grids_in.lambdas, "lambda");
  grids.taus = sorted_grid(grids_in.taus, "tau");
  for (double w : grids.weights) {
    if (w < 0.0) throw ConfigError("weight grid values must be >= 0");
  }
  for (double l : grids.lambdas) {
    if (l < 0.0) throw ConfigError("lambda grid values must be >= 0");
  }
  if (grids_in.uncertainty_band && !(*grids_in.uncertainty_band >= 0.0 && std::isfinite(*grids_in.uncertainty_band))) {
    throw ConfigError("uncertainty band must be finite and >= 0");
  }

  const auto m = build_matrix(samples, detector_order, verdicts, support);
  const Search search(m, grids, grids_in.uncertainty_band);

  SearchState zero;
  zero.weights.assign(detector_order.size(), 0.0);
  zero.lambda = start_value(grids.lambdas);
  zero.tau = start_value(grids.taus);
  search.evaluate(zero);
  const double degenerate_f1 = zero.f1;

  SearchState from_zero = zero;
  search.ascend(from_zero);

  std::optional<SearchState> best_single;
  for (std::size_t d = 0; d < detector_order.size(); ++d) {
    for (double g : grids.weights) {
      if (g <= 0.0) continue;
      SearchState st = zero;
      st.weights[d] = g;
      search.evaluate(st);
      if (!best_single || st.f1 > best_single->f1 + kEps) best_single = st;
    }
  }

  SearchState best = from_zero;
  if (best_single) {
    search.ascend(*best_single);
    if (best_single->f1 > best.f1 + kEps) best = *best_single;
  }

  const bool positive = std::any_of(best.weights.begin(), best.weights.end(), [](double w) { return w > 0.0; });
  if (!positive || !(best.f1 > degenerate_f1 + kEps)) {
    throw DataError("strategy '" + strategy_id + "': no positive-weight configuration beats the all-zero predictor " +
                    "(macro-F1 " + std::to_string(degenerate_f1) + "); try a larger weight grid");
  }

  Strategy out;
  out.id = std::move(strategy_id);
  for (std::size_t d = 0; d < detector_order.size(); ++d) out.weights[detector_order[d]] = best.weights[d];
  out.lambda = best.lambda;
  out.tau = best.tau;
  out.uncertainty_band = grids_in.uncertainty_band;
  return out;
}

const std::vector<std::string>& default_registry() {
  static const std::vector<std::string> kRegistry = {
      "special_token",
      "consecutive_punctuation",
      "common_phrase",
      "sentence_segment",
      "common_token",
      "fast_detectgpt_qwen",
      "fast_detectgpt_analytic_qwen",
      "fast_detectgpt_analytic_glm",
      "binoculars_qwen",
      "chinese_bert",
      "chinese_roberta",
      "chinese_roberta_ext_short",
      "glm4_chat_lora",
      "qwen25_instruct_lora",
      "qwen25_instruct_lora_ext_short",
      "qwen25_instruct_lora_short",
      "hybrid_roberta",
      "hybrid_roberta_ext_short",
  };
  return kRegistry;
}

StrategyBook default_strategy_book(std::span<const std::string> registry) {
  struct Row {
    const char* id;
    std::array<double, 18> w;
    double lambda;
    double tau;
    LengthInterval interval;
  };
  static const std::array<Row, 4> kRows = {{
      {"ext_short", {0, 10, 0, 10, 10, 60, 60, 55, 60, 0, 0, 0, 0, 0, 95, 400, 10, 0}, 250, 0, {0, 75}},
      {"short", {0, 10, 0, 10, 40, 40, 40, 35, 40, 0, 0, 0, 0, 40, 95, 400, 40, 0}, 150, 0, {75, 150}},
      {"medium", {0, 10, 0, 10, 40, 40, 40, 35, 40, 0, 0, 0, 0, 100, 80, 90, 40, 0}, 0, 0, {150, 300}},
      {"general", {0, 10, 10, 10, 40, 70, 70, 70, 75, 50, 60, 0, 85, 400, 40, 60, 80, 0}, 0, 0, {300, std::nullopt}},
  }};
  if (registry.size() != 18) {
    throw ConfigError("the default strategy book needs 18 registered detectors, got " +
                      std::to_string(registry.size()));
  }
  StrategyBook book;
  book.registry.assign(registry.begin(), registry.end());
  book.mode = BookMode::LengthBuckets;
  for (const auto& row : kRows) {
    Strategy s;
    s.id = row.id;
    for (std::size_t i = 0; i < 18; ++i) s.weights[book.registry[i]] = row.w[i];
    s.lambda = row.lambda;
    s.tau = row.tau;
    s.predicate = row.interval;
    book.strategies.push_back(std::move(s));
  }
  book.validate();
  return book;
}

namespace {

json features_to_json(const FeatureVector& f) {
  return {{"char_length", f.char_length},
          {"comma_rate", f.comma_rate},
          {"newline_rate", f.newline_rate},
          {"punct_density", f.punct_density},
          {"external_perplexity", f.external_perplexity ? json(*f.external_perplexity) : json(nullptr)}};
}

FeatureVector features_from_json(const json& j) {
  FeatureVector f{j.at("char_length").get<double>(), j.at("comma_rate").get<double>(),
                  j.at("newline_rate").get<double>(), j.at("punct_density").get<double>(), std::nullopt};
  if (j.contains("external_perplexity") && !j["external_perplexity"].is_null()) {
    f.external_perplexity = j["external_perplexity"].get<double>();
  }
  return f;
}

}  // namespace

json book_to_json(const StrategyBook& book) {
  json obj;
  obj["mode"] = book.mode == BookMode::LengthBuckets ? "length_buckets" : "clusters";
  obj["registry"] = book.registry;
  obj["strategies"] = json::array();
  for (const auto& s : book.strategies) {
    json js;
    js["id"] = s.id;
    js["weights"] = s.weights;
    js["lambda"] = s.lambda;
    js["tau"] = s.tau;
    js["uncertainty_band"] = s.uncertainty_band ? json(*s.uncertainty_band) : json(nullptr);
    if (const auto* li = std::get_if<LengthInterval>(&s.predicate)) {
      js["length"] = {li->lo, li->hi ? json(*li->hi) : json(nullptr)};
    } else {
      js["centroid"] = std::get<CentroidRef>(s.predicate).index;
    }
    obj["strategies"].push_back(std::move(js));
  }
  obj["centroids"] = json::array();
  for (const auto& c : book.centroids) obj["centroids"].push_back(features_to_json(c));
  if (book.standardization) {
    obj["standardization"] = {{"mean", book.standardization->mean},
                              {"scale", book.standardization->scale},
                              {"use_perplexity", book.standardization->use_perplexity}};
  } else {
    obj["standardization"] = nullptr;
  }
  return obj;
}

StrategyBook book_from_json(const json& obj) {
  StrategyBook book;
  try {
    const auto mode = obj.at("mode").get<std::string>();
    if (mode == "length_buckets") {
      book.mode = BookMode::LengthBuckets;
    } else if (mode == "clusters") {
      book.mode = BookMode::Clusters;
    } else {
      throw ConfigError("unknown strategy book mode '" + mode + "'");
    }
    book.registry = obj.value("registry", std::vector<std::string>{});
    for (const auto& js : obj.at("strategies")) {
      Strategy s;
      s.id = js.at("id").get<std::string>();
      s.weights = js.at("weights").get<std::map<std::string, double>>();
      s.lambda = js.value("lambda", 0.0);
      s.tau = js.value("tau", 0.0);
      if (js.contains("uncertainty_band") && !js["uncertainty_band"].is_null()) {
        s.uncertainty_band = js["uncertainty_band"].get<double>();
      }
      if (js.contains("length")) {
        const auto& len = js["length"];
        LengthInterval li;
        li.lo = len.at(0).get<std::size_t>();
        if (!len.at(1).is_null()) li.hi = len.at(1).get<std::size_t>();
        s.predicate = li;
      } else if (js.contains("centroid")) {
        s.predicate = CentroidRef{js["centroid"].get<std::size_t>()};
      } else {
        throw ConfigError("strategy '" + s.id + "' has neither 'length' nor 'centroid'");
      }
      book.strategies.push_back(std::move(s));
    }
    if (obj.contains("centroids")) {
      for (const auto& c : obj["centroids"]) book.centroids.push_back(features_from_json(c));
    }
    if (obj.contains("standardization") && !obj["standardization"].is_null()) {
      const auto& st = obj["standardization"];
      book.standardization = Standardization{st.at("mean").get<std::vector<double>>(),
                                             st.at("scale").get<std::vector<double>>(),
                                             st.at("use_perplexity").get<bool>()};
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed strategy book: ") + e.what());
  }
  book.validate();
  return book;
}

void save_book(const StrategyBook& book, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << book_to_json(book).dump(2) << '\n';
}

StrategyBook load_book(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open strategy book '" + path.string() + "'");
  try {
    return book_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace ensemjudge::strategy
