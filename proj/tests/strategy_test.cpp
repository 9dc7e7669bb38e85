#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ensemjudge/error.hpp"
#include "ensemjudge/strategy.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace ensemjudge::strategy {
namespace {

using testing::repeat;
using testing::sample;

FeatureVector point(double a, double b) {
  FeatureVector f;
  f.char_length = a;
  f.comma_rate = b;
  return f;
}

double brute_sse(std::span<const FeatureVector> pts, const ClusterFit& fit) {
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto z = fit.standardization.apply(pts[i]);
    const auto c = fit.standardization.apply(fit.centroids[fit.assignment[i]]);
    for (std::size_t d = 0; d < z.size(); ++d) sse += (z[d] - c[d]) * (z[d] - c[d]);
  }
  return sse;
}

TEST(ExtractFeatures, EmptyText) {
  EXPECT_EQ(extract_features(sample("")), FeatureVector{});
}

TEST(ExtractFeatures, RateArithmetic) {
  const auto text = repeat("字", 93) + repeat("，", 5) + "\n\n";
  const auto f = extract_features(sample(text), 12.5);
  EXPECT_DOUBLE_EQ(f.char_length, 100.0);
  EXPECT_DOUBLE_EQ(f.comma_rate, 5.0);
  EXPECT_DOUBLE_EQ(f.newline_rate, 2.0);
  EXPECT_DOUBLE_EQ(f.punct_density, 0.05);
  EXPECT_EQ(f.external_perplexity, 12.5);
  EXPECT_EQ(extract_features(sample(text), 12.5), f);
}

TEST(Standardization, ZeroVarianceAndMissingPerplexity) {
  std::vector<FeatureVector> pts{point(1, 3), point(3, 3)};
  pts[0].external_perplexity = 1.0;
  auto st = Standardization::fit(pts);
  EXPECT_FALSE(st.use_perplexity);
  const auto z = st.apply(point(2, 3));
  EXPECT_DOUBLE_EQ(z[0], 0.0);
  EXPECT_DOUBLE_EQ(z[1], 0.0);

  pts[1].external_perplexity = 3.0;
  st = Standardization::fit(pts);
  EXPECT_TRUE(st.use_perplexity);
  EXPECT_DOUBLE_EQ(st.apply(point(2, 3)).back(), 0.0);
  const auto back = st.invert(st.apply(pts[1]));
  EXPECT_NEAR(back.char_length, 3.0, 1e-12);
  EXPECT_NEAR(*back.external_perplexity, 3.0, 1e-12);
}

TEST(FitClusters, SingleClusterIsTheMean) {
  const std::vector<FeatureVector> pts{point(1, 10), point(2, 20), point(6, 0)};
  const auto fit = fit_clusters(pts, 1, 7);
  ASSERT_EQ(fit.centroids.size(), 1u);
  EXPECT_NEAR(fit.centroids[0].char_length, 3.0, 1e-12);
  EXPECT_NEAR(fit.centroids[0].comma_rate, 10.0, 1e-12);
  EXPECT_NEAR(fit.sse, brute_sse(pts, fit), 1e-9);
}

TEST(FitClusters, OneClusterPerPointHasZeroSse) {
  std::mt19937_64 rng(3);
  std::vector<FeatureVector> pts;
  for (int i = 0; i < 12; ++i) pts.push_back(point(static_cast<double>(rng() % 1000), static_cast<double>(i)));
  const auto fit = fit_clusters(pts, pts.size(), 1);
  EXPECT_NEAR(fit.sse, 0.0, 1e-12);
}

TEST(FitClusters, SeparatedCloudsAreRecovered) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<FeatureVector> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(point(50 + n(rng), 2 + 0.1 * n(rng)));
  for (int i = 0; i < 40; ++i) pts.push_back(point(500 + n(rng), 8 + 0.1 * n(rng)));
  const auto two = fit_clusters(pts, 2, 9);
  const auto one = fit_clusters(pts, 1, 9);
  EXPECT_LE(two.sse, one.sse);
  EXPECT_NEAR(two.sse, brute_sse(pts, two), 1e-9);
  for (std::size_t i = 1; i < 40; ++i) EXPECT_EQ(two.assignment[i], two.assignment[0]);
  for (std::size_t i = 41; i < 80; ++i) EXPECT_EQ(two.assignment[i], two.assignment[40]);
  EXPECT_NE(two.assignment[0], two.assignment[40]);
  for (const auto& c : two.centroids) {
    EXPECT_TRUE(std::abs(c.char_length - 50) < 5 || std::abs(c.char_length - 500) < 5);
  }
}

TEST(FitClusters, SameSeedSameResult) {
  std::mt19937_64 rng(8);
  std::vector<FeatureVector> pts;
  for (int i = 0; i < 50; ++i) pts.push_back(point(static_cast<double>(rng() % 100), static_cast<double>(rng() % 7)));
  const auto a = fit_clusters(pts, 4, 123);
  const auto b = fit_clusters(pts, 4, 123);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.assignment, b.assignment);
}

TEST(FitClusters, BestOfFiveSseIsMonotoneInK) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<FeatureVector> pts;
    for (int i = 0; i < 60; ++i) pts.push_back(point(n(rng) * 100, n(rng)));
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= 6; ++k) {
      double best = std::numeric_limits<double>::infinity();
      for (std::uint64_t seed = 0; seed < 5; ++seed) best = std::min(best, fit_clusters(pts, k, seed).sse);
      EXPECT_LE(best, prev + 1e-9) << "k=" << k;
      prev = best;
    }
  }
}

TEST(FitClusters, BadK) {
  const std::vector<FeatureVector> pts{point(1, 1)};
  EXPECT_THROW(fit_clusters(pts, 0, 1), ConfigError);
  EXPECT_THROW(fit_clusters(pts, 2, 1), ConfigError);
}

TEST(NearestCentroid, TiesGoToLowestIndex) {
  const std::vector<FeatureVector> pts{point(0, 0), point(2, 2)};
  const auto st = Standardization::fit(pts);
  const std::vector<FeatureVector> cents{point(0, 0), point(2, 2)};
  EXPECT_EQ(nearest_centroid(point(1, 1), cents, st), 0u);
  EXPECT_EQ(nearest_centroid(point(1.5, 1.5), cents, st), 1u);
}

TEST(DefaultBook, AssignsByLength) {
  const auto book = default_strategy_book();
  EXPECT_EQ(assign_strategy(sample(repeat("字", 60)), book).id, "ext_short");
  EXPECT_EQ(assign_strategy(sample(repeat("字", 75)), book).id, "short");
  EXPECT_EQ(assign_strategy(sample(repeat("字", 149)), book).id, "short");
  EXPECT_EQ(assign_strategy(sample(repeat("字", 150)), book).id, "medium");
  EXPECT_EQ(assign_strategy(sample(repeat("字", 5000)), book).id, "general");
  EXPECT_EQ(assign_strategy(sample(""), book).id, "ext_short");
}

TEST(DefaultBook, TableCells) {
  const auto book = default_strategy_book();
  const auto& reg = default_registry();
  ASSERT_EQ(reg.size(), 18u);
  const auto w = [&](const std::string& strategy, std::size_t one_based) {
    for (const auto& s : book.strategies) {
      if (s.id == strategy) return s.weight_of(reg[one_based - 1]);
    }
    ADD_FAILURE() << strategy;
    return -1.0;
  };
  const auto& general = book.strategies[3];
  EXPECT_EQ(general.id, "general");
  EXPECT_EQ(general.lambda, 0.0);
  EXPECT_EQ(general.tau, 0.0);
  const std::vector<double> general_row{0, 10, 10, 10, 40, 70, 70, 70, 75, 50, 60, 0, 85, 400, 40, 60, 80, 0};
  double sum = 0.0;
  for (std::size_t i = 1; i <= 18; ++i) {
    EXPECT_EQ(w("general", i), general_row[i - 1]) << i;
    sum += w("general", i);
  }
  EXPECT_EQ(sum, 1130.0);
  EXPECT_EQ(book.strategies[2].id, "medium");
  EXPECT_EQ(book.strategies[2].lambda, 0.0);
  EXPECT_EQ(w("medium", 14), 100.0);
  const auto& ext = book.strategies[0];
  EXPECT_EQ(ext.id, "ext_short");
  EXPECT_EQ(ext.lambda, 250.0);
  EXPECT_EQ(ext.tau, 0.0);
  EXPECT_EQ(w("ext_short", 16), 400.0);
  EXPECT_EQ(w("ext_short", 6), 60.0);
  EXPECT_EQ(w("ext_short", 8), 55.0);
  EXPECT_EQ(w("ext_short", 15), 95.0);
  EXPECT_EQ(w("ext_short", 17), 10.0);
  EXPECT_EQ(book.strategies[1].lambda, 150.0);
  EXPECT_EQ(w("short", 14), 40.0);
}

TEST(DefaultBook, RegistryMustHaveEighteen) {
  const std::vector<std::string> small{"a", "b"};
  EXPECT_THROW(default_strategy_book(small), ConfigError);
}

TEST(DefaultBook, MatchesShippedFile) {
  const auto shipped = load_book(std::filesystem::path(ENSEMJUDGE_SOURCE_DIR) / "configs/default_strategy_book.json");
  EXPECT_EQ(shipped, default_strategy_book());
}

TEST(DefaultBook, WeightGridCoversTable) {
  const auto grid = default_weight_grid();
  for (const auto& s : default_strategy_book().strategies) {
    for (const auto& [id, w] : s.weights) EXPECT_NE(std::find(grid.begin(), grid.end(), w), grid.end()) << w;
  }
}

TEST(StrategyBook, JsonRoundTrip) {
  testing::TempDir dir;
  auto book = default_strategy_book();
  book.strategies[0].uncertainty_band = 25.0;
  save_book(book, dir / "b.json");
  EXPECT_EQ(load_book(dir / "b.json"), book);

  std::vector<FeatureVector> pts{point(1, 2), point(50, 3), point(400, 1)};
  pts[0].punct_density = 0.1;
  const auto fit = fit_clusters(pts, 2, 4);
  StrategyBook clustered;
  clustered.mode = BookMode::Clusters;
  clustered.centroids = fit.centroids;
  clustered.standardization = fit.standardization;
  clustered.strategies = {{"cluster_0", {{"a", 1.0}}, 0, 0, std::nullopt, CentroidRef{0}},
                          {"cluster_1", {{"a", 2.0}}, 5, 1, std::nullopt, CentroidRef{1}}};
  clustered.validate();
  save_book(clustered, dir / "c.json");
  EXPECT_EQ(load_book(dir / "c.json"), clustered);
}

TEST(StrategyBook, ValidationCatchesGapsAndBadMaps) {
  auto book = default_strategy_book();
  book.strategies.erase(book.strategies.begin() + 1);
  EXPECT_THROW(book.validate(), ConfigError);
  book = default_strategy_book();
  book.strategies.pop_back();
  EXPECT_THROW(book.validate(), ConfigError);
  book = default_strategy_book();
  book.strategies[0].weights["unknown_detector"] = 1.0;
  EXPECT_THROW(book.validate(), ConfigError);
  book = default_strategy_book();
  for (auto& [id, w] : book.strategies[0].weights) w = 0.0;
  EXPECT_THROW(book.validate(), ConfigError);

  StrategyBook clustered;
  clustered.mode = BookMode::Clusters;
  clustered.centroids = {point(0, 0), point(1, 1)};
  clustered.standardization = Standardization::fit(clustered.centroids);
  clustered.strategies = {{"c0", {{"a", 1.0}}, 0, 0, std::nullopt, CentroidRef{0}}};
  EXPECT_THROW(clustered.validate(), ConfigError);
}

TEST(AssignStrategy, ClusterMode) {
  std::vector<FeatureVector> pts;
  for (int i = 0; i < 10; ++i) pts.push_back(extract_features(sample(repeat("字", 20 + i))));
  for (int i = 0; i < 10; ++i) pts.push_back(extract_features(sample(repeat("字", 900 + i))));
  const auto fit = fit_clusters(pts, 2, 1);
  StrategyBook book;
  book.mode = BookMode::Clusters;
  book.centroids = fit.centroids;
  book.standardization = fit.standardization;
  book.strategies = {{"c0", {{"a", 1.0}}, 0, 0, std::nullopt, CentroidRef{0}},
                     {"c1", {{"a", 1.0}}, 0, 0, std::nullopt, CentroidRef{1}}};
  book.validate();
  const auto& s_short = assign_strategy(sample(repeat("字", 25)), book);
  const auto& s_long = assign_strategy(sample(repeat("字", 905)), book);
  EXPECT_NE(s_short.id, s_long.id);
  EXPECT_EQ(s_short.id, "c" + std::to_string(fit.assignment[0]));
}

TEST(Strategy, ScaledAndBand) {
  Strategy s{"x", {{"a", 10.0}, {"b", 0.0}, {"c", 40.0}}, 5.0, 1.0, std::nullopt, LengthInterval{}};
  EXPECT_EQ(s.effective_band(), 20.0);
  const auto t = s.scaled(3.0);
  EXPECT_EQ(t.weight_of("c"), 120.0);
  EXPECT_EQ(t.lambda, 15.0);
  EXPECT_EQ(t.tau, 3.0);
  EXPECT_EQ(t.effective_band(), 60.0);
  EXPECT_EQ(s.weight_of("missing"), 0.0);
  EXPECT_THROW(s.scaled(0.0), ConfigError);
}

// Fixture for the weight search: one detector copies gold, the others are noise.
struct SearchFixture {
  Dataset samples;
  VerdictTable verdicts;
  std::vector<std::string> order;
};

SearchFixture search_fixture(std::uint64_t seed, std::size_t n, bool with_perfect) {
  std::mt19937_64 rng(seed);
  SearchFixture fx;
  fx.order = {"noise_a", "perfect", "noise_b"};
  std::vector<TextSample> s;
  for (std::size_t i = 0; i < n; ++i) {
    const Label g = i % 2 ? Label::LLM : Label::Human;
    s.emplace_back("s" + std::to_string(i), "t", g);
    fx.verdicts["noise_a"].emplace_back("noise_a", rng() % 2 ? Label::LLM : Label::Human);
    fx.verdicts["noise_b"].emplace_back("noise_b", rng() % 2 ? Label::LLM : Label::Human);
    const Label p = with_perfect ? g : (rng() % 4 == 0 ? (g == Label::LLM ? Label::Human : Label::LLM) : g);
    fx.verdicts["perfect"].emplace_back("perfect", p);
  }
  fx.samples = Dataset(std::move(s));
  return fx;
}

TEST(OptimizeWeights, PerfectDetectorReachesOne) {
  const auto fx = search_fixture(1, 40, true);
  const SearchGrids grids{{0, 10, 40}};
  const auto s = optimize_weights(fx.samples, fx.order, fx.verdicts, grids);
  EXPECT_GT(s.weight_of("perfect"), 0.0);
  EXPECT_DOUBLE_EQ(strategy_macro_f1(fx.samples, fx.verdicts, s), 1.0);
}

TEST(OptimizeWeights, IdenticalDetectorsDoNoWorse) {
  const auto fx0 = search_fixture(2, 60, false);
  SearchFixture fx = fx0;
  fx.order = {"a", "b"};
  fx.verdicts.clear();
  for (const auto& v : fx0.verdicts.at("perfect")) {
    fx.verdicts["a"].emplace_back("a", v.prediction());
    fx.verdicts["b"].emplace_back("b", v.prediction());
  }
  const auto s = optimize_weights(fx.samples, fx.order, fx.verdicts, SearchGrids{{0, 10, 40}});
  const Strategy only_a{"a", {{"a", 10.0}}, 0, 0, std::nullopt, LengthInterval{}};
  EXPECT_GE(strategy_macro_f1(fx.samples, fx.verdicts, s), strategy_macro_f1(fx.samples, fx.verdicts, only_a));
}

TEST(OptimizeWeights, ResultsStayOnTheGrid) {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const auto fx = search_fixture(rng(), 30, false);
    const SearchGrids grids{{0, 10, 40}, {0, 50}, {-10, 0, 10}};
    std::vector<double> support;
    for (std::size_t i = 0; i < fx.samples.size(); ++i) support.push_back(static_cast<double>(rng() % 3) - 1.0);
    const auto s = optimize_weights(fx.samples, fx.order, fx.verdicts, grids, support);
    for (const auto& [id, w] : s.weights) EXPECT_TRUE(w == 0 || w == 10 || w == 40) << w;
    EXPECT_TRUE(s.lambda == 0 || s.lambda == 50);
    EXPECT_TRUE(s.tau == -10 || s.tau == 0 || s.tau == 10);
  }
}

TEST(OptimizeWeights, NeverWorseThanBestSingleDetector) {
  std::mt19937_64 rng(31);
  const std::vector<double> grid{0, 10, 35, 40};
  for (int trial = 0; trial < 30; ++trial) {
    const auto fx = search_fixture(rng(), 25, false);
    const auto s = optimize_weights(fx.samples, fx.order, fx.verdicts, SearchGrids{grid});
    const double got = strategy_macro_f1(fx.samples, fx.verdicts, s);
    std::vector<Label> gold;
    for (const auto& x : fx.samples) gold.push_back(*x.gold_label());
    for (const auto& id : fx.order) {
      std::vector<Label> pred;
      for (const auto& v : fx.verdicts.at(id)) pred.push_back(v.prediction());
      EXPECT_GE(got + 1e-12, oracle::macro_f1(pred, gold)) << id;
    }
  }
}

TEST(OptimizeWeights, Deterministic) {
  const auto fx = search_fixture(4, 50, false);
  const SearchGrids grids{default_weight_grid(), {0, 100}, {0}};
  EXPECT_EQ(optimize_weights(fx.samples, fx.order, fx.verdicts, grids),
            optimize_weights(fx.samples, fx.order, fx.verdicts, grids));
}

TEST(OptimizeWeights, UselessDetectorsAreAnError) {
  SearchFixture fx;
  fx.order = {"always_llm"};
  std::vector<TextSample> s;
  for (int i = 0; i < 10; ++i) {
    s.emplace_back("s" + std::to_string(i), "t", i % 2 ? Label::LLM : Label::Human);
    fx.verdicts["always_llm"].emplace_back("always_llm", Label::LLM);
  }
  fx.samples = Dataset(std::move(s));
  EXPECT_THROW(optimize_weights(fx.samples, fx.order, fx.verdicts, SearchGrids{{0, 10}}), DataError);
}

TEST(OptimizeWeights, SupportOutsideTheBandIsIgnored) {
  // The detector is right on every sample; support is always wrong. With
  // band 0 the search sees support only where s == tau, which never
  // happens for a single nonzero weight and tau 0.
  const auto fx = search_fixture(6, 20, true);
  std::vector<double> support;
  for (const auto& x : fx.samples) support.push_back(*x.gold_label() == Label::LLM ? -1.0 : 1.0);
  SearchGrids grids{{0, 10}, {0, 100}, {0}};
  grids.uncertainty_band = 0.0;
  const auto s = optimize_weights(fx.samples, fx.order, fx.verdicts, grids, support);
  EXPECT_DOUBLE_EQ(strategy_macro_f1(fx.samples, fx.verdicts, s, support), 1.0);
  EXPECT_EQ(s.uncertainty_band, 0.0);
}

}  // namespace
}  // namespace ensemjudge::strategy
