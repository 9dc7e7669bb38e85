// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ensemjudge/augment.hpp"
#include "ensemjudge/cli.hpp"
#include "ensemjudge/evaluation.hpp"
#include "ensemjudge/random.hpp"
#include "ensemjudge/scores.hpp"
#include "ensemjudge/strategy.hpp"
#include "ensemjudge/support.hpp"
#include "ensemjudge/voting.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace ensemjudge;
namespace fs = std::filesystem;
using nlohmann::json;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

struct Check {
  bool ok = true;
  std::string detail;
};

int g_failures = 0;

void report(const std::string& name, const std::function<Check()>& body) {
  Check c;
  try {
    c = body();
  } catch (const std::exception& e) {
    c = {false, std::string("exception: ") + e.what()};
  }
  if (!c.ok) ++g_failures;
  std::printf("%s %s: %s\n", c.ok ? "PASS" : "FAIL", name.c_str(), c.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double gaussian(Rng& rng, double mean, double sd) {
  const double u1 = 1.0 - rng.uniform01();
  const double u2 = rng.uniform01();
  return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::string hanzi(Rng& rng, std::size_t n) {
  static const std::vector<std::string> kChars{"的", "一", "是", "了", "我", "不", "人", "在", "他", "有",
                                               "这", "个", "上", "们", "来", "到", "时", "大", "地", "为"};
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += kChars[rng.uniform_index(kChars.size())];
  return s;
}

class ConstantSupport : public support::SupportProvider {
 public:
  double value = 0.0;
  support::SupportSignal query(const TextSample&) override { return {value, std::nullopt}; }
};

Check voting_oracle() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::string> ids{"d1", "d2", "d3", "d4", "d5"};
  Rng rng(11);
  ConstantSupport provider;
  const TextSample text("x", "文本");
  long cases = 0, mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> w(5);
    for (auto& x : w) x = static_cast<int>(rng.uniform_index(101));
    for (int lambda : {0, 50}) {
      for (int tau : {0, 50}) {
        strategy::StrategyBook book;
        strategy::Strategy st;
        st.id = "only";
        for (int i = 0; i < 5; ++i) st.weights[ids[i]] = w[i];
        st.lambda = lambda;
        st.tau = tau;
        st.uncertainty_band = 1e9;  // always consult, so the rule is exercised ungated
        book.strategies.push_back(st);
        const voting::JudgeInputs in{&book, &provider, {}, std::nullopt};
        for (int d : {-1, 0, 1}) {
          provider.value = d;
          for (int pattern = 0; pattern < 32; ++pattern) {
            std::vector<int> votes(5);
            std::vector<DetectorVerdict> verdicts;
            for (int i = 0; i < 5; ++i) {
              votes[i] = (pattern >> i) & 1 ? 1 : -1;
              verdicts.emplace_back(ids[i], votes[i] == 1 ? Label::LLM : Label::Human);
            }
            const int expected = oracle::ensemble_decision(w, votes, lambda, d, tau);
            mismatches += to_int(voting::judge(text, verdicts, in).decision) != expected;
            ++cases;
          }
        }
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && secs < 1.0,
          std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches, " + fmt("%.3f s", secs)};
}

Check table_cells() {
  struct Row {
    const char* id;
    std::vector<double> w;
    double lambda, tau;
    std::size_t lo;
    std::optional<std::size_t> hi;
  };
  const std::vector<Row> rows{
      {"ext_short", {0, 10, 0, 10, 10, 60, 60, 55, 60, 0, 0, 0, 0, 0, 95, 400, 10, 0}, 250, 0, 0, 75},
      {"short", {0, 10, 0, 10, 40, 40, 40, 35, 40, 0, 0, 0, 0, 40, 95, 400, 40, 0}, 150, 0, 75, 150},
      {"medium", {0, 10, 0, 10, 40, 40, 40, 35, 40, 0, 0, 0, 0, 100, 80, 90, 40, 0}, 0, 0, 150, 300},
      {"general", {0, 10, 10, 10, 40, 70, 70, 70, 75, 50, 60, 0, 85, 400, 40, 60, 80, 0}, 0, 0, 300, std::nullopt},
  };
  const auto book = strategy::default_strategy_book();
  const auto& reg = strategy::default_registry();
  int bad = 0, cells = 0;
  if (book.strategies.size() != rows.size()) return {false, "strategy count " + std::to_string(book.strategies.size())};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& st = book.strategies[r];
    bad += st.id != rows[r].id;
    for (std::size_t i = 0; i < 18; ++i, ++cells) bad += st.weight_of(reg[i]) != rows[r].w[i];
    bad += st.lambda != rows[r].lambda;
    bad += st.tau != rows[r].tau;
    cells += 2;
    const auto* len = std::get_if<strategy::LengthInterval>(&st.predicate);
    bad += !len || len->lo != rows[r].lo || len->hi != rows[r].hi;
  }
  std::vector<DetectorVerdict> all_llm;
  for (const auto& id : reg) all_llm.emplace_back(id, Label::LLM);
  const double s = voting::compute_score(all_llm, book.strategies.back());
  return {bad == 0 && s == 1130.0,
          std::to_string(cells) + " cells, " + std::to_string(bad) + " mismatches, general s = " + fmt("%g", s)};
}

Check degenerate_baseline() {
  std::vector<Label> gold, pred(1000, Label::LLM);
  for (int i = 0; i < 1000; ++i) gold.push_back(i % 2 ? Label::LLM : Label::Human);
  const double f1 = eval::macro_f1(pred, gold);
  return {std::abs(f1 - 0.3333) <= 0.0005, "always-LLM macro-F1 " + fmt("%.6f", f1)};
}

Check macro_f1_oracle() {
  Rng rng(5);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    // Vary the class balance so degenerate confusion matrices appear too.
    const double p_pred = rng.uniform01(), p_gold = rng.uniform01();
    std::vector<Label> pred, gold;
    for (int i = 0; i < 200; ++i) {
      pred.push_back(rng.uniform01() < p_pred ? Label::LLM : Label::Human);
      gold.push_back(rng.uniform01() < p_gold ? Label::LLM : Label::Human);
    }
    worst = std::max(worst, std::abs(eval::macro_f1(pred, gold) - oracle::macro_f1(pred, gold)));
  }
  return {worst <= 1e-12, "max |diff| over 1000 vectors " + fmt("%.3g", worst)};
}

struct ScoreSet {
  Dataset data;
  scores::ScoreMap scores;
  std::vector<double> values;
  std::vector<Label> gold;
};

ScoreSet gaussians(double llm_mean, double human_mean, double sd, std::uint64_t seed) {
  Rng rng(seed);
  ScoreSet out;
  std::vector<TextSample> samples;
  for (int i = 0; i < 1000; ++i) {
    const Label g = i < 500 ? Label::LLM : Label::Human;
    const std::string id = "g" + std::to_string(i);
    const double v = gaussian(rng, g == Label::LLM ? llm_mean : human_mean, sd);
    samples.emplace_back(id, "文本", g);
    out.scores[id] = v;
    out.values.push_back(v);
    out.gold.push_back(g);
  }
  out.data = Dataset(std::move(samples));
  return out;
}

double in_bucket_f1(const ScoreSet& set, const scores::ThresholdProfile& profile) {
  std::vector<Label> pred;
  for (const auto& s : set.data) pred.push_back(scores::score_to_verdict(s, set.scores.at(s.id()), profile).prediction());
  return oracle::macro_f1(pred, set.gold);
}

Check calibration() {
  const auto sep = gaussians(3.0, -3.0, 0.3, 21);
  const auto p_sep = scores::calibrate_thresholds(sep.scores, sep.data, {}, scores::Orientation::HigherIsLlm, "g");
  const double f_sep = in_bucket_f1(sep, p_sep);

  const auto ov = gaussians(0.5, -0.5, 1.0, 22);
  const auto p_ov = scores::calibrate_thresholds(ov.scores, ov.data, {}, scores::Orientation::HigherIsLlm, "g");
  const double f_ov = in_bucket_f1(ov, p_ov);
  const auto [lo, hi] = std::minmax_element(ov.values.begin(), ov.values.end());
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(*lo + (*hi - *lo) * i / 100.0);
  const double f_grid = oracle::best_f1_over(ov.values, ov.gold, grid);
  return {f_sep == 1.0 && f_ov >= f_grid,
          "separable " + fmt("%.4f", f_sep) + ", overlapping " + fmt("%.4f", f_ov) + " vs 101-grid " + fmt("%.4f", f_grid)};
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> owned{"ensemjudge"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : owned) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

std::string jsonl(const std::vector<json>& rows) {
  std::string s;
  for (const auto& r : rows) s += r.dump() + "\n";
  return s;
}

// Short texts (< 75 chars) where A is exact and long texts (>= 300 chars)
// where B is exact; each detector's score is noise in the other regime.
Check ensemble_dominance() {
  TempDir dir;
  Rng rng(99);
  std::vector<json> a_scores, b_scores;
  std::vector<double> test_a, test_b;
  std::vector<Label> test_gold;
  for (const char* split : {"train", "test"}) {
    std::vector<json> rows;
    for (int i = 0; i < 400; ++i) {
      const bool llm = (i / 2) % 2 == 0;
      const bool is_short = i % 2 == 0;
      const std::string id = std::string(split) + std::to_string(i);
      const std::size_t len = is_short ? 30 + rng.uniform_index(41) : 320 + rng.uniform_index(161);
      rows.push_back({{"id", id}, {"text", hanzi(rng, len)}, {"label", llm ? 1 : 0}});
      const double exact = (llm ? 1.0 : -1.0) * (1.0 + rng.uniform01());
      const double noise = 4.0 * rng.uniform01() - 2.0;
      const double a = is_short ? exact : noise;
      const double b = is_short ? noise : exact;
      a_scores.push_back({{"id", id}, {"score", a}});
      b_scores.push_back({{"id", id}, {"score", b}});
      if (std::string(split) == "test") {
        test_a.push_back(a);
        test_b.push_back(b);
        test_gold.push_back(llm ? Label::LLM : Label::Human);
      }
    }
    write_file(dir / (std::string(split) + ".jsonl"), jsonl(rows));
  }
  write_file(dir / "a.jsonl", jsonl(a_scores));
  write_file(dir / "b.jsonl", jsonl(b_scores));
  const json cfg = {
      {"seed", 1},
      {"train", "train.jsonl"},
      {"input", "test.jsonl"},
      {"detectors",
       {{{"id", "A"}, {"kind", "score"}, {"location", "a.jsonl"}},
        {{"id", "B"}, {"kind", "score"}, {"location", "b.jsonl"}}}},
      {"strategy", {{"book", "fit"}, {"mode", "length_buckets"}}},
  };
  write_file(dir / "config.json", cfg.dump(2));
  TempDir out;
  for (const char* cmd : {"fit", "predict", "eval"}) {
    if (run_cli({cmd, "-c", (dir / "config.json").string(), "-o", out.path().string()}) != 0) {
      return {false, std::string("`") + cmd + "` failed"};
    }
  }
  const double ens = json::parse(read_file(out / "report.json"))["overall_macro_f1"].get<double>();
  // Best single global threshold in either orientation bounds each detector alone.
  const auto alone = [&](const std::vector<double>& v) {
    return std::max(oracle::exhaustive_best_f1(v, test_gold, true), oracle::exhaustive_best_f1(v, test_gold, false));
  };
  const double fa = alone(test_a), fb = alone(test_b);
  return {ens >= std::max(fa, fb) + 0.05,
          "ensemble " + fmt("%.4f", ens) + ", A " + fmt("%.4f", fa) + ", B " + fmt("%.4f", fb)};
}

// Small integer weights so exact ties at tau and gated support both occur.
strategy::StrategyBook small_weight_book(const std::vector<std::string>& reg, Rng& rng) {
  strategy::StrategyBook book;
  book.registry = reg;
  const std::vector<std::pair<std::size_t, std::optional<std::size_t>>> spans{{0, 150}, {150, std::nullopt}};
  for (const auto& [lo, hi] : spans) {
    strategy::Strategy st;
    st.id = "len" + std::to_string(lo);
    for (const auto& id : reg) st.weights[id] = static_cast<double>(rng.uniform_index(4));
    st.lambda = 3.0;
    st.tau = static_cast<double>(rng.uniform_index(5)) - 2.0;
    st.predicate = strategy::LengthInterval{lo, hi};
    book.strategies.push_back(st);
  }
  return book;
}

Check homogeneity() {
  const auto& reg = strategy::default_registry();
  Rng rng(7);
  const std::vector<strategy::StrategyBook> books{strategy::default_strategy_book(), small_weight_book(reg, rng)};
  ConstantSupport provider;
  std::size_t changed = 0, consulted = 0, ties = 0;
  for (const auto& book : books) {
    const auto scaled = book.scaled(7.0);
    for (int i = 0; i < 500; ++i) {
      const TextSample text("h" + std::to_string(i), hanzi(rng, 20 + rng.uniform_index(400)));
      std::vector<DetectorVerdict> verdicts;
      for (const auto& id : reg) verdicts.emplace_back(id, rng.uniform_index(2) ? Label::LLM : Label::Human);
      provider.value = static_cast<double>(rng.uniform_index(5)) / 2.0 - 1.0;
      const voting::JudgeInputs a{&book, &provider, {}, std::nullopt};
      const voting::JudgeInputs b{&scaled, &provider, {}, std::nullopt};
      const auto oa = voting::judge(text, verdicts, a);
      const auto ob = voting::judge(text, verdicts, b);
      changed += oa.decision != ob.decision || oa.support_consulted != ob.support_consulted;
      consulted += oa.support_consulted;
      const auto& st = strategy::assign_strategy(text, book);
      ties += oa.score + st.lambda * oa.support_signal == st.tau;
    }
  }
  return {changed == 0, "2 books x 500 samples, " + std::to_string(changed) + " changed decisions (" +
                            std::to_string(consulted) + " consulted support, " + std::to_string(ties) + " exact ties)"};
}

Check reliability() {
  std::vector<TextSample> samples;
  Rng rng(3);
  for (int i = 0; i < 4; ++i) samples.emplace_back("r" + std::to_string(i), hanzi(rng, 200), i % 2 ? Label::LLM : Label::Human);
  const Dataset four(samples);
  const std::map<std::string, Label> gold{{"r0", Label::Human}, {"r1", Label::LLM}, {"r2", Label::Human}, {"r3", Label::LLM}};
  const auto base_id = [](const std::string& id) { return id.substr(0, id.find('#')); };
  // Right on every identity copy and on the excerpts of r2 and r3 only.
  const eval::SampleJudge judge = [&](const TextSample& s) {
    const Label g = gold.at(base_id(s.id()));
    const bool wrong = s.subset() == "excerpt" && (base_id(s.id()) == "r0" || base_id(s.id()) == "r1");
    return wrong ? (g == Label::LLM ? Label::Human : Label::LLM) : g;
  };
  const std::vector<augment::Transform> two{augment::Identity{}, augment::Excerpt{64, 1}};
  const auto rel = eval::estimate_reliability(judge, four, two);

  std::vector<TextSample> many;
  for (int i = 0; i < 300; ++i) many.emplace_back("m" + std::to_string(i), hanzi(rng, 50), rng.uniform_index(2) ? Label::LLM : Label::Human);
  const Dataset big(many);
  const eval::SampleJudge noisy = [](const TextSample& s) { return fnv1a(s.text()) % 3 ? Label::LLM : Label::Human; };
  std::size_t right = 0;
  for (const auto& s : big) right += noisy(s) == *s.gold_label();
  const double accuracy = static_cast<double>(right) / static_cast<double>(big.size());
  const std::vector<augment::Transform> id_only{augment::Identity{}};
  const auto rel_id = eval::estimate_reliability(noisy, big, id_only);
  return {rel.value == 0.75 && rel.correct == 6 && rel_id.value == accuracy,
          "4x2 " + fmt("%.4f", rel.value) + " (" + std::to_string(rel.correct) + "/8), identity-only " +
              fmt("%.6f", rel_id.value) + " vs accuracy " + fmt("%.6f", accuracy)};
}

Check excerpts() {
  Rng rng(17);
  std::size_t bad = 0, nondeterministic = 0;
  for (int i = 0; i < 1000; ++i) {
    const TextSample s("e" + std::to_string(i), hanzi(rng, 512));
    const std::uint64_t seed = rng.next();
    const auto a = augment::excerpt(s, 64, seed);
    const auto b = augment::excerpt(s, 64, seed);
    bad += a.char_length() != 64 || s.text().find(a.text()) == std::string::npos;
    nondeterministic += a.text() != b.text();
  }
  return {bad == 0 && nondeterministic == 0, "1000 excerpts, " + std::to_string(bad) + " malformed, " +
                                                 std::to_string(nondeterministic) + " nondeterministic"};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
  }
  return files;
}

Check end_to_end_determinism() {
  const fs::path config = fs::path(ENSEMJUDGE_SOURCE_DIR) / "fixtures" / "config.json";
  TempDir a, b;
  for (const auto* dir : {&a, &b}) {
    for (const char* cmd : {"fit", "predict", "eval"}) {
      if (run_cli({cmd, "-c", config.string(), "-o", dir->path().string()}) != 0) {
        return {false, std::string("`") + cmd + "` failed"};
      }
    }
  }
  const auto sa = snapshot(a.path()), sb = snapshot(b.path());
  std::size_t differing = 0;
  for (const auto& [name, bytes] : sa) differing += !sb.contains(name) || sb.at(name) != bytes;
  return {!sa.empty() && sa.size() == sb.size() && differing == 0,
          std::to_string(sa.size()) + " files, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  report("voting-oracle", voting_oracle);
  report("default-book-cells", table_cells);
  report("degenerate-baseline", degenerate_baseline);
  report("macro-f1-oracle", macro_f1_oracle);
  report("calibration", calibration);
  report("ensemble-dominance", ensemble_dominance);
  report("homogeneity", homogeneity);
  report("reliability", reliability);
  report("excerpt-contract", excerpts);
  report("end-to-end-determinism", end_to_end_determinism);
  std::printf("%d failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
