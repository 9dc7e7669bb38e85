#include "ensemjudge/scores.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "ensemjudge/error.hpp"
#include "ensemjudge/evaluation.hpp"
#include "ensemjudge/http.hpp"

namespace ensemjudge::scores {

using nlohmann::json;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

const char* orientation_name(Orientation o) {
  return o == Orientation::HigherIsLlm ? "higher_is_llm" : "lower_is_llm";
}

Orientation parse_orientation(std::string_view name) {
  if (name == "higher_is_llm") return Orientation::HigherIsLlm;
  if (name == "lower_is_llm") return Orientation::LowerIsLlm;
  throw ConfigError("unknown orientation '" + std::string(name) + "'");
}

void validate_registry(std::span<const ScoreSource> sources) {
  std::unordered_set<std::string_view> seen;
  for (const auto& s : sources) {
    if (s.detector_id.empty()) throw ConfigError("score source with empty detector_id");
    if (!seen.insert(s.detector_id).second) throw ConfigError("duplicate detector_id '" + s.detector_id + "'");
    if (s.location.empty()) throw ConfigError("score source '" + s.detector_id + "' has no location");
  }
}

ScoreMap parse_score_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open score file '" + path.string() + "'");
  ScoreMap scores;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ": line " + std::to_string(line_no);
    std::string id;
    double score = 0.0;
    try {
      const auto obj = json::parse(line);
      id = obj.at("id").get<std::string>();
      const auto& raw = obj.at("score");
      if (!raw.is_number()) throw DataError(where + ": score for id '" + id + "' is not a finite number");
      score = raw.get<double>();
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!std::isfinite(score)) throw DataError(where + ": score for id '" + id + "' is not finite");
    if (!scores.emplace(id, score).second) throw DataError(where + ": duplicate id '" + id + "'");
  }
  return scores;
}

namespace {

ScoreMap load_http_scores(const ScoreSource& source, const Dataset& dataset) {
  ScoreMap scores;
  for (const auto& s : dataset) {
    const auto reply = http::post_json(source.location, "/score", json{{"id", s.id()}, {"text", s.text()}});
    auto it = reply.find("score");
    if (it == reply.end() || !it->is_number()) {
      throw AdapterError("detector '" + source.detector_id + "': reply for id '" + s.id() + "' has no numeric score");
    }
    const double v = it->get<double>();
    if (!std::isfinite(v)) {
      throw DataError("detector '" + source.detector_id + "': score for id '" + s.id() + "' is not finite");
    }
    scores.emplace(s.id(), v);
  }
  return scores;
}

}  // namespace

ScoreMap load_scores(const ScoreSource& source, const Dataset& dataset) {
  if (source.kind == SourceKind::HttpEndpoint) return load_http_scores(source, dataset);

  auto all = parse_score_file(source.location);
  ScoreMap scores;
  std::vector<std::string> missing;
  for (const auto& s : dataset) {
    auto it = all.find(s.id());
    if (it == all.end()) {
      missing.push_back(s.id());
    } else {
      scores.emplace(it->first, it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = "detector '" + source.detector_id + "': " + std::to_string(missing.size()) +
                      " id(s) missing from '" + source.location + "':";
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) msg += " '" + missing[i] + "'";
    if (missing.size() > 10) msg += " ...";
    throw DataError(msg);
  }
  return scores;
}

Label apply_threshold(double score, double threshold, Orientation orientation) {
  const bool llm = orientation == Orientation::HigherIsLlm ? score >= threshold : score <= threshold;
  return llm ? Label::LLM : Label::Human;
}

SweepResult sweep_threshold(std::span<const double> scores, std::span<const Label> gold, Orientation orientation) {
  if (scores.size() != gold.size()) throw DataError("scores and labels differ in length");
  if (scores.empty()) throw DataError("cannot calibrate on an empty set");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::size_t total_llm = 0;
  for (auto g : gold) total_llm += g == Label::LLM;
  const std::size_t total_human = gold.size() - total_llm;

  // Candidates ascend; `below_*` counts samples strictly below the current
  // candidate. higher_is_llm predicts LLM at or above, lower_is_llm at or below.
  std::size_t below_llm = 0;
  std::size_t below_human = 0;
  const auto f1_here = [&] {
    eval::ConfusionMatrix cm;
    if (orientation == Orientation::HigherIsLlm) {
      cm.tp = total_llm - below_llm;
      cm.fp = total_human - below_human;
      cm.fn = below_llm;
      cm.tn = below_human;
    } else {
      cm.tp = below_llm;
      cm.fp = below_human;
      cm.fn = total_llm - below_llm;
      cm.tn = total_human - below_human;
    }
    return eval::macro_f1(cm);
  };

  SweepResult best{-kInf, f1_here()};
  std::size_t i = 0;
  while (i < order.size()) {
    const double value = scores[order[i]];
    while (i < order.size() && scores[order[i]] == value) {
      ++(gold[order[i]] == Label::LLM ? below_llm : below_human);
      ++i;
    }
    double candidate = kInf;
    if (i < order.size()) {
      const double next = scores[order[i]];
      candidate = value + (next - value) / 2.0;
      // Adjacent doubles: the midpoint rounds onto one of them; snap so
      // apply_threshold reproduces the split counted here.
      if (orientation == Orientation::HigherIsLlm && candidate <= value) candidate = next;
      if (orientation == Orientation::LowerIsLlm && candidate >= next) candidate = value;
    }
    const double f1 = f1_here();
    if (f1 > best.macro_f1 + 1e-12) best = {candidate, f1};
  }
  return best;
}

ThresholdProfile calibrate_thresholds(const ScoreMap& scores, const Dataset& labeled,
                                      std::span<const std::size_t> bucket_edges, Orientation orientation,
                                      std::string detector_id) {
  for (std::size_t i = 1; i < bucket_edges.size(); ++i) {
    if (bucket_edges[i] <= bucket_edges[i - 1]) throw ConfigError("bucket edges must be strictly increasing");
  }
  const std::size_t n_buckets = bucket_edges.size() + 1;
  const auto bucket_of = [&](std::size_t len) {
    return static_cast<std::size_t>(std::upper_bound(bucket_edges.begin(), bucket_edges.end(), len) -
                                    bucket_edges.begin());
  };

  std::vector<double> all_scores;
  std::vector<Label> all_gold;
  std::vector<std::vector<double>> bucket_scores(n_buckets);
  std::vector<std::vector<Label>> bucket_gold(n_buckets);
  for (const auto& s : labeled) {
    if (!s.gold_label()) continue;
    auto it = scores.find(s.id());
    if (it == scores.end()) throw DataError("detector '" + detector_id + "': no score for id '" + s.id() + "'");
    all_scores.push_back(it->second);
    all_gold.push_back(*s.gold_label());
    const auto b = bucket_of(s.char_length());
    bucket_scores[b].push_back(it->second);
    bucket_gold[b].push_back(*s.gold_label());
  }
  if (all_scores.empty()) throw DataError("detector '" + detector_id + "': no labeled samples to calibrate on");

  ThresholdProfile profile;
  profile.detector_id = std::move(detector_id);
  profile.orientation = orientation;
  const auto global = sweep_threshold(all_scores, all_gold, orientation);
  for (std::size_t b = 0; b < n_buckets; ++b) {
    ThresholdBucket bucket;
    if (b < bucket_edges.size()) bucket.upper = bucket_edges[b];
    const auto& g = bucket_gold[b];
    const bool both = std::find(g.begin(), g.end(), Label::LLM) != g.end() &&
                      std::find(g.begin(), g.end(), Label::Human) != g.end();
    if (both) {
      bucket.threshold = sweep_threshold(bucket_scores[b], g, orientation).threshold;
    } else {
      bucket.threshold = global.threshold;
      profile.warnings.push_back("bucket " + std::to_string(b) + " has " + std::to_string(g.size()) +
                                 " sample(s) of a single class; using the all-lengths threshold");
    }
    profile.buckets.push_back(bucket);
  }
  return profile;
}

void ThresholdProfile::validate() const {
  if (buckets.empty()) throw ConfigError("threshold profile '" + detector_id + "' has no buckets");
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    const bool last = i + 1 == buckets.size();
    if (last != !buckets[i].upper.has_value()) {
      throw ConfigError("threshold profile '" + detector_id + "': only the last bucket may be unbounded");
    }
    if (i > 0 && !last && *buckets[i].upper <= *buckets[i - 1].upper) {
      throw ConfigError("threshold profile '" + detector_id + "': bucket bounds must increase");
    }
    if (std::isnan(buckets[i].threshold)) throw ConfigError("threshold profile '" + detector_id + "': NaN threshold");
  }
}

const ThresholdBucket& ThresholdProfile::bucket_for(std::size_t char_length) const {
  for (const auto& b : buckets) {
    if (!b.upper || char_length < *b.upper) return b;
  }
  throw ConfigError("threshold profile '" + detector_id + "' does not cover length " + std::to_string(char_length));
}

DetectorVerdict score_to_verdict(const TextSample& sample, double score, const ThresholdProfile& profile) {
  const auto& bucket = profile.bucket_for(sample.char_length());
  return {profile.detector_id, apply_threshold(score, bucket.threshold, profile.orientation), score};
}

namespace {

json threshold_to_json(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return t;
}

double threshold_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw DataError("bad threshold '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

void save_profile(const ThresholdProfile& profile, const std::filesystem::path& path) {
  json obj;
  obj["detector_id"] = profile.detector_id;
  obj["orientation"] = orientation_name(profile.orientation);
  obj["buckets"] = json::array();
  for (const auto& b : profile.buckets) {
    obj["buckets"].push_back({{"max_char_length", b.upper ? json(*b.upper) : json(nullptr)},
                              {"threshold", threshold_to_json(b.threshold)}});
  }
  obj["warnings"] = profile.warnings;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << obj.dump(2) << '\n';
}

ThresholdProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open threshold profile '" + path.string() + "'");
  ThresholdProfile profile;
  try {
    const auto obj = json::parse(in);
    profile.detector_id = obj.at("detector_id").get<std::string>();
    profile.orientation = parse_orientation(obj.at("orientation").get<std::string>());
    for (const auto& b : obj.at("buckets")) {
      ThresholdBucket bucket;
      if (!b.at("max_char_length").is_null()) bucket.upper = b.at("max_char_length").get<std::size_t>();
      bucket.threshold = threshold_from_json(b.at("threshold"));
      profile.buckets.push_back(bucket);
    }
    profile.warnings = obj.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  profile.validate();
  return profile;
}

}  // namespace ensemjudge::scores
