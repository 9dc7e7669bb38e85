#include "ensemjudge/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <set>

#include <json.hpp>

#include "ensemjudge/error.hpp"
#include "ensemjudge/utf8.hpp"

namespace ensemjudge::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> RunConfig::detector_ids() const {
  std::vector<std::string> ids;
  for (const auto& d : detectors) ids.push_back(d.id);
  return ids;
}

namespace {

// A JSON node that remembers where it sits in the config so errors can name it.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_.is_object() && j_.contains(key) && !j_[key].is_null(); }

  Node at(const std::string& key) const {
    if (!has(key)) throw ConfigError(path_ + "." + key + ": required key is missing");
    return {j_[key], path_ + "." + key};
  }
  Node at(std::size_t i) const { return {j_.at(i), path_ + "[" + std::to_string(i) + "]"}; }
  std::size_t size() const { return j_.size(); }

  template <typename T>
  T as() const {
    try {
      return j_.get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + ": has the wrong type");
    }
  }
  template <typename T>
  T get(const std::string& key) const {
    return at(key).as<T>();
  }
  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? at(key).as<T>() : fallback;
  }

 private:
  const json& j_;
  std::string path_;
};

DetectorKind parse_detector_kind(const Node& n) {
  const auto kind = n.as<std::string>();
  if (kind == "special_token") return DetectorKind::SpecialToken;
  if (kind == "consecutive_punctuation") return DetectorKind::ConsecutivePunctuation;
  if (kind == "common_phrase") return DetectorKind::CommonPhrase;
  if (kind == "sentence_segment") return DetectorKind::SentenceSegment;
  if (kind == "common_token") return DetectorKind::CommonToken;
  if (kind == "score") return DetectorKind::Score;
  throw ConfigError(n.path() + ": unknown detector kind '" + kind + "'");
}

augment::Transform parse_transform(const Node& n, std::uint64_t seed) {
  const auto kind = n.get<std::string>("kind");
  if (kind == "excerpt") {
    const auto len = n.get<long long>("target_len");
    if (len < 1) throw ConfigError(n.path() + ".target_len: must be >= 1");
    return augment::Excerpt{static_cast<std::size_t>(len), n.get<std::uint64_t>("seed", seed)};
  }
  if (kind == "back_translate") {
    return augment::BackTranslate{n.get<std::string>("pivot", "en"), n.get<std::string>("source", "zh")};
  }
  if (kind == "identity") return augment::Identity{};
  throw ConfigError(n.path() + ".kind: unknown transform '" + kind + "'");
}

std::vector<augment::Transform> parse_transforms(const Node& n, std::uint64_t seed) {
  std::vector<augment::Transform> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(parse_transform(n.at(i), seed));
  if (out.empty()) throw ConfigError(n.path() + ": needs at least one transform");
  return out;
}

std::vector<std::size_t> parse_edges(const Node& n) {
  std::vector<std::size_t> edges;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto v = n.at(i).as<long long>();
    if (v < 1) throw ConfigError(n.at(i).path() + ": bucket edges must be positive");
    edges.push_back(static_cast<std::size_t>(v));
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) throw ConfigError(n.path() + ": bucket edges must be strictly increasing");
  }
  return edges;
}

}  // namespace

RunConfig load_config(const fs::path& path, const std::optional<fs::path>& out_dir,
                      const std::optional<std::uint64_t>& seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": malformed JSON: " + e.what());
  }
  const Node cfg(root, "config");
  if (!root.is_object()) throw ConfigError("config: must be a JSON object");

  RunConfig rc;
  rc.config_path = path;
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  rc.out_dir = out_dir.value_or(base);
  const auto in_path = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
  const auto out_path = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : rc.out_dir / p; };

  rc.seed = seed.value_or(cfg.get<std::uint64_t>("seed", 0));
  rc.llm_label = cfg.get<int>("llm_label", 1);
  if (rc.llm_label != 0 && rc.llm_label != 1) throw ConfigError("config.llm_label: must be 0 or 1");
  if (cfg.has("train")) rc.train = in_path(cfg.get<std::string>("train"));
  if (cfg.has("input")) rc.input = in_path(cfg.get<std::string>("input"));
  rc.artifacts_dir = out_path(cfg.get<std::string>("artifacts_dir", "artifacts"));

  const auto dets = cfg.at("detectors");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto d = dets.at(i);
    DetectorSpec spec;
    spec.id = d.get<std::string>("id");
    if (spec.id.empty()) throw ConfigError(d.path() + ".id: must be nonempty");
    if (!seen.insert(spec.id).second) throw ConfigError(d.path() + ".id: duplicate detector id '" + spec.id + "'");
    spec.kind = parse_detector_kind(d.at("kind"));
    if (spec.kind == DetectorKind::CommonToken) {
      spec.tokenizer = freq::parse_tokenizer_kind(d.get<std::string>("tokenizer", "char_unigram"));
      if (spec.tokenizer == freq::TokenizerKind::ExternalVocab) spec.vocab = in_path(d.get<std::string>("vocab"));
      spec.smoothing = d.get<double>("smoothing", 1.0);
      if (!(spec.smoothing > 0.0)) throw ConfigError(d.path() + ".smoothing: must be > 0");
      const auto mode = d.get<std::string>("attribution", "relative_frequency");
      if (mode == "raw_count") {
        spec.attribution = freq::AttributionMode::RawCount;
      } else if (mode != "relative_frequency") {
        throw ConfigError(d.path() + ".attribution: unknown mode '" + mode + "'");
      }
    } else if (spec.kind == DetectorKind::Score) {
      spec.source.detector_id = spec.id;
      const auto src = d.get<std::string>("source", "score_file");
      if (src == "score_file") {
        spec.source.kind = scores::SourceKind::ScoreFile;
        spec.source.location = in_path(d.get<std::string>("location")).string();
      } else if (src == "http_endpoint") {
        spec.source.kind = scores::SourceKind::HttpEndpoint;
        spec.source.location = d.get<std::string>("location");
      } else {
        throw ConfigError(d.path() + ".source: unknown score source '" + src + "'");
      }
      try {
        spec.source.orientation = scores::parse_orientation(d.get<std::string>("orientation", "higher_is_llm"));
      } catch (const ConfigError& e) {
        throw ConfigError(d.path() + ".orientation: " + e.what());
      }
    }
    rc.detectors.push_back(std::move(spec));
  }
  if (rc.detectors.empty()) throw ConfigError("config.detectors: needs at least one detector");

  if (cfg.has("rules")) {
    const auto r = cfg.at("rules");
    rc.rules.special_tokens = r.get<std::vector<std::string>>("special_tokens", rc.rules.special_tokens);
    rc.rules.clause_rate_threshold = r.get<double>("clause_rate_threshold", rc.rules.clause_rate_threshold);
    rc.rules.consecutive_punct_min_run = r.get<int>("consecutive_punct_min_run", rc.rules.consecutive_punct_min_run);
    if (r.has("punctuation")) {
      rc.rules.punct_class.clear();
      for (char32_t c : utf8::decode(r.get<std::string>("punctuation"))) rc.rules.punct_class.insert(c);
    }
    try {
      rc.rules.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("config.rules: " + std::string(e.what()));
    }
  }
  if (cfg.has("phrase_mining")) {
    const auto p = cfg.at("phrase_mining");
    rc.phrase_top_k = p.get<std::size_t>("top_k", rc.phrase_top_k);
    rc.phrase_min_len = p.get<std::size_t>("min_len", rc.phrase_min_len);
    rc.phrase_max_len = p.get<std::size_t>("max_len", rc.phrase_max_len);
    if (rc.phrase_min_len < 1 || rc.phrase_min_len > rc.phrase_max_len) {
      throw ConfigError("config.phrase_mining: needs 1 <= min_len <= max_len");
    }
  }
  if (cfg.has("calibration") && cfg.at("calibration").has("bucket_edges")) {
    rc.calibration_edges = parse_edges(cfg.at("calibration").at("bucket_edges"));
  }

  if (cfg.has("strategy")) {
    const auto s = cfg.at("strategy");
    const auto book = s.get<std::string>("book", "fit");
    if (book == "fit") {
      rc.book_source = BookSource::Fit;
    } else if (book == "default") {
      rc.book_source = BookSource::Default;
    } else {
      rc.book_source = BookSource::File;
      rc.book_path = in_path(book);
    }
    const auto mode = s.get<std::string>("mode", "length_buckets");
    if (mode == "length_buckets") {
      rc.book_mode = strategy::BookMode::LengthBuckets;
    } else if (mode == "clusters") {
      rc.book_mode = strategy::BookMode::Clusters;
    } else {
      throw ConfigError(s.path() + ".mode: unknown mode '" + mode + "'");
    }
    if (s.has("bucket_edges")) rc.strategy_edges = parse_edges(s.at("bucket_edges"));
    rc.clusters_k = s.get<std::size_t>("k", rc.clusters_k);
    rc.grids.weights = s.get<std::vector<double>>("weight_grid", rc.grids.weights);
    rc.grids.lambdas = s.get<std::vector<double>>("lambda_grid", rc.grids.lambdas);
    rc.grids.taus = s.get<std::vector<double>>("tau_grid", rc.grids.taus);
    if (s.has("uncertainty_band")) rc.grids.uncertainty_band = s.get<double>("uncertainty_band");
  }

  if (cfg.has("support")) {
    const auto s = cfg.at("support");
    const auto kind = s.get<std::string>("kind", "none");
    if (kind == "none") {
      rc.support_kind = SupportKind::None;
    } else if (kind == "stub") {
      rc.support_kind = SupportKind::Stub;
      if (s.has("fixture")) rc.support_fixture = in_path(s.get<std::string>("fixture"));
    } else if (kind == "http_llm") {
      rc.support_kind = SupportKind::HttpLlm;
      rc.support.kind = support::ProviderKind::HttpLlm;
      rc.support.endpoint = s.get<std::string>("endpoint");
      rc.support.demonstrations = support::load_demonstrations(in_path(s.get<std::string>("demonstrations")));
    } else {
      throw ConfigError(s.path() + ".kind: unknown support provider '" + kind + "'");
    }
    if (s.has("prompt_template")) rc.support.prompt_template = s.get<std::string>("prompt_template");
    try {
      rc.support.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(s.path() + ": " + e.what());
    }
  }

  if (cfg.has("overrides")) {
    const auto o = cfg.at("overrides");
    for (std::size_t i = 0; i < o.size(); ++i) {
      const auto r = o.at(i);
      const int label = r.get<int>("label");
      if (label != 0 && label != 1) throw ConfigError(r.path() + ".label: must be 0 or 1");
      voting::OverrideRule rule{r.get<std::string>("rule_id"), r.get<std::string>("pattern"),
                                label == rc.llm_label ? Label::LLM : Label::Human, r.get<bool>("enabled", false)};
      if (rule.pattern.empty()) throw ConfigError(r.path() + ".pattern: must be nonempty");
      rc.overrides.push_back(std::move(rule));
    }
  }

  if (cfg.has("augment")) {
    const auto a = cfg.at("augment");
    if (a.has("input")) rc.augment_input = in_path(a.get<std::string>("input"));
    if (a.has("transforms")) rc.augment_transforms = parse_transforms(a.at("transforms"), rc.seed);
    if (a.has("mt")) {
      const auto mt = a.at("mt");
      const auto kind = mt.get<std::string>("kind");
      if (kind == "stub") {
        rc.mt_kind = MtKind::Stub;
        if (mt.has("fixture")) rc.mt_fixture = in_path(mt.get<std::string>("fixture"));
      } else if (kind == "http") {
        rc.mt_kind = MtKind::Http;
        rc.mt_endpoint = mt.get<std::string>("endpoint");
      } else {
        throw ConfigError(mt.path() + ".kind: unknown MT client '" + kind + "'");
      }
    }
  }

  if (cfg.has("evaluation")) {
    const auto e = cfg.at("evaluation");
    rc.system_name = e.get<std::string>("system_name", rc.system_name);
    if (e.has("reliability")) rc.reliability_transforms = parse_transforms(e.at("reliability").at("transforms"), rc.seed);
  }

  const auto out = cfg.has("output") ? cfg.at("output") : Node(json::object(), "config.output");
  rc.predictions = out_path(out.get<std::string>("predictions", "predictions.jsonl"));
  if (out.has("audit")) rc.audit = out_path(out.get<std::string>("audit"));
  rc.report = out_path(out.get<std::string>("report", "report.json"));
  rc.report_table = out_path(out.get<std::string>("report_table", "report.txt"));
  rc.augmented = out_path(out.get<std::string>("augmented", "augmented.jsonl"));
  return rc;
}

fs::path lexicon_path(const RunConfig& cfg) { return cfg.artifacts_dir / "lexicon.jsonl"; }
fs::path token_table_path(const RunConfig& cfg, const std::string& id) {
  return cfg.artifacts_dir / ("token_table." + id + ".json");
}
fs::path profile_path(const RunConfig& cfg, const std::string& id) {
  return cfg.artifacts_dir / "thresholds" / (id + ".json");
}
fs::path book_path(const RunConfig& cfg) { return cfg.artifacts_dir / "strategy_book.json"; }

namespace {

Label file_label(Label l, int llm_label) {
  return llm_label == 1 ? l : (l == Label::LLM ? Label::Human : Label::LLM);
}

Dataset read_dataset(const RunConfig& cfg, const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("config.") + what + ": required key is missing");
  auto ds = load_dataset(path);
  if (cfg.llm_label == 1) return ds;
  std::vector<TextSample> flipped;
  for (const auto& s : ds) {
    std::optional<Label> gold;
    if (s.gold_label()) gold = file_label(*s.gold_label(), 0);
    flipped.emplace_back(s.id(), s.text(), gold, s.subset());
  }
  return Dataset(std::move(flipped));
}

Dataset read_labeled(const RunConfig& cfg, const fs::path& path, const char* what) {
  auto ds = read_dataset(cfg, path, what);
  for (const auto& s : ds) {
    if (!s.gold_label()) {
      throw DataError(path.string() + ": sample '" + s.id() + "' has no 'label' field");
    }
  }
  return ds;
}

freq::Tokenizer make_tokenizer(const DetectorSpec& spec) {
  if (spec.tokenizer == freq::TokenizerKind::ExternalVocab) return freq::Tokenizer::from_vocab_file(spec.vocab);
  return freq::Tokenizer(spec.tokenizer);
}

bool uses(const RunConfig& cfg, DetectorKind kind) {
  return std::any_of(cfg.detectors.begin(), cfg.detectors.end(), [&](const auto& d) { return d.kind == kind; });
}

std::unique_ptr<support::SupportProvider> make_support(const RunConfig& cfg) {
  switch (cfg.support_kind) {
    case SupportKind::None: return nullptr;
    case SupportKind::Stub:
      if (cfg.support_fixture.empty()) return std::make_unique<support::StubSupportProvider>();
      return std::make_unique<support::StubSupportProvider>(support::StubSupportProvider::from_file(cfg.support_fixture));
    case SupportKind::HttpLlm: return std::make_unique<support::HttpSupportProvider>(cfg.support);
  }
  return nullptr;
}

std::unique_ptr<augment::MtClient> make_mt(const RunConfig& cfg) {
  switch (cfg.mt_kind) {
    case MtKind::None: return nullptr;
    case MtKind::Stub:
      if (cfg.mt_fixture.empty()) return std::make_unique<augment::StubMtClient>();
      return std::make_unique<augment::StubMtClient>(augment::StubMtClient::from_file(cfg.mt_fixture));
    case MtKind::Http: return std::make_unique<augment::HttpMtClient>(cfg.mt_endpoint);
  }
  return nullptr;
}

strategy::VerdictTable by_detector(const RunConfig& cfg, const std::vector<std::vector<DetectorVerdict>>& per_sample,
                                   std::span<const std::size_t> rows) {
  strategy::VerdictTable table;
  for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
    auto& col = table[cfg.detectors[d].id];
    for (auto r : rows) col.push_back(per_sample[r][d]);
  }
  return table;
}

Dataset subset_of(const Dataset& ds, std::span<const std::size_t> rows) {
  std::vector<TextSample> out;
  for (auto r : rows) out.push_back(ds[r]);
  return Dataset(std::move(out));
}

std::string bucket_name(std::span<const std::size_t> edges, std::size_t b) {
  static const std::vector<std::string> kNames = {"ext_short", "short", "medium", "general"};
  if (std::equal(edges.begin(), edges.end(), scores::default_bucket_edges().begin(),
                 scores::default_bucket_edges().end())) {
    return kNames[b];
  }
  const std::string lo = b == 0 ? "0" : std::to_string(edges[b - 1]);
  const std::string hi = b < edges.size() ? std::to_string(edges[b]) : "inf";
  return "len_" + lo + "_" + hi;
}

strategy::StrategyBook fit_book(const RunConfig& cfg, const Dataset& train,
                                const std::vector<std::vector<DetectorVerdict>>& verdicts,
                                std::span<const double> support_values, std::vector<std::string>& warnings) {
  const auto order = cfg.detector_ids();
  std::vector<std::size_t> all(train.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  const auto support_for = [&](std::span<const std::size_t> rows) {
    std::vector<double> s;
    if (!support_values.empty()) {
      for (auto r : rows) s.push_back(support_values[r]);
    }
    return s;
  };
  const auto optimize = [&](std::span<const std::size_t> rows, const std::string& id) {
    const auto sup = support_for(rows);
    return strategy::optimize_weights(subset_of(train, rows), order, by_detector(cfg, verdicts, rows), cfg.grids,
                                      sup, id);
  };

  const auto global = optimize(all, "global");
  const auto fit_group = [&](std::span<const std::size_t> rows, const std::string& id) {
    if (rows.empty()) {
      warnings.push_back("strategy '" + id + "': no training samples; using the global weights");
    } else {
      try {
        return optimize(rows, id);
      } catch (const DataError& e) {
        warnings.push_back(std::string(e.what()) + "; using the global weights");
      }
    }
    auto s = global;
    s.id = id;
    return s;
  };

  strategy::StrategyBook book;
  book.registry = order;
  book.mode = cfg.book_mode;
  if (cfg.book_mode == strategy::BookMode::LengthBuckets) {
    const auto& edges = cfg.strategy_edges;
    std::vector<std::vector<std::size_t>> groups(edges.size() + 1);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto len = train[i].char_length();
      groups[static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), len) - edges.begin())].push_back(i);
    }
    for (std::size_t b = 0; b < groups.size(); ++b) {
      auto s = fit_group(groups[b], bucket_name(edges, b));
      strategy::LengthInterval iv{b == 0 ? 0 : edges[b - 1], std::nullopt};
      if (b < edges.size()) iv.hi = edges[b];
      s.predicate = iv;
      book.strategies.push_back(std::move(s));
    }
  } else {
    std::vector<strategy::FeatureVector> features;
    for (const auto& s : train) features.push_back(strategy::extract_features(s));
    const auto fit = strategy::fit_clusters(features, cfg.clusters_k, cfg.seed);
    book.centroids = fit.centroids;
    book.standardization = fit.standardization;
    std::vector<std::vector<std::size_t>> groups(cfg.clusters_k);
    for (std::size_t i = 0; i < train.size(); ++i) groups[fit.assignment[i]].push_back(i);
    for (std::size_t c = 0; c < groups.size(); ++c) {
      auto s = fit_group(groups[c], "cluster_" + std::to_string(c));
      s.predicate = strategy::CentroidRef{c};
      book.strategies.push_back(std::move(s));
    }
  }
  book.validate();
  return book;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace

std::vector<std::vector<DetectorVerdict>> compute_verdicts(const RunConfig& cfg, const Artifacts& artifacts,
                                                           const Dataset& dataset) {
  rules::RuleConfig rc = cfg.rules;
  rc.phrase_lexicon = artifacts.lexicon;

  std::map<std::string, scores::ScoreMap> score_maps;
  std::map<std::string, freq::Tokenizer> tokenizers;
  for (const auto& d : cfg.detectors) {
    if (d.kind == DetectorKind::Score) {
      if (!artifacts.profiles.contains(d.id)) throw ConfigError("no threshold profile for detector '" + d.id + "'");
      score_maps[d.id] = scores::load_scores(d.source, dataset);
    } else if (d.kind == DetectorKind::CommonToken) {
      if (!artifacts.token_tables.contains(d.id)) throw ConfigError("no token table for detector '" + d.id + "'");
      tokenizers.emplace(d.id, make_tokenizer(d));
    }
  }

  std::vector<std::vector<DetectorVerdict>> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset) {
    std::vector<DetectorVerdict> row;
    row.reserve(cfg.detectors.size());
    for (const auto& d : cfg.detectors) {
      std::optional<DetectorVerdict> v;
      switch (d.kind) {
        case DetectorKind::SpecialToken: v = rules::detect_special_token(s, rc); break;
        case DetectorKind::ConsecutivePunctuation: v = rules::detect_consecutive_punctuation(s, rc); break;
        case DetectorKind::CommonPhrase: v = rules::detect_common_phrase(s, rc); break;
        case DetectorKind::SentenceSegment: v = rules::detect_sentence_segment(s, rc); break;
        case DetectorKind::CommonToken:
          v = freq::classify_common_token(s, artifacts.token_tables.at(d.id), tokenizers.at(d.id));
          break;
        case DetectorKind::Score:
          v = scores::score_to_verdict(s, score_maps.at(d.id).at(s.id()), artifacts.profiles.at(d.id));
          break;
      }
      // Verdicts carry the configured id, whatever the detector calls itself.
      row.emplace_back(d.id, v->prediction(), v->raw_score());
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<voting::VoteOutcome> judge_dataset(const RunConfig& cfg, const Artifacts& artifacts,
                                               const Dataset& dataset) {
  const auto verdicts = compute_verdicts(cfg, artifacts, dataset);
  const auto provider = make_support(cfg);
  voting::JudgeInputs inputs;
  inputs.book = &artifacts.book;
  inputs.support = provider.get();
  inputs.overrides = cfg.overrides;
  std::vector<voting::VoteOutcome> outcomes;
  outcomes.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) outcomes.push_back(voting::judge(dataset[i], verdicts[i], inputs));
  return outcomes;
}

Artifacts load_artifacts(const RunConfig& cfg) {
  Artifacts a;
  const auto need = [](const fs::path& p) {
    if (!fs::exists(p)) throw ConfigError("missing artifact '" + p.string() + "'; run `fit` first");
  };
  if (uses(cfg, DetectorKind::CommonPhrase)) {
    need(lexicon_path(cfg));
    a.lexicon = rules::load_lexicon(lexicon_path(cfg));
  }
  for (const auto& d : cfg.detectors) {
    if (d.kind == DetectorKind::CommonToken) {
      need(token_table_path(cfg, d.id));
      a.token_tables[d.id] = freq::load_token_table(token_table_path(cfg, d.id));
    } else if (d.kind == DetectorKind::Score) {
      need(profile_path(cfg, d.id));
      a.profiles[d.id] = scores::load_profile(profile_path(cfg, d.id));
    }
  }
  switch (cfg.book_source) {
    case BookSource::Fit:
      need(book_path(cfg));
      a.book = strategy::load_book(book_path(cfg));
      break;
    case BookSource::Default: a.book = strategy::default_strategy_book(cfg.detector_ids()); break;
    case BookSource::File: a.book = strategy::load_book(cfg.book_path); break;
  }
  const auto ids = cfg.detector_ids();
  for (const auto& s : a.book.strategies) {
    for (const auto& [id, w] : s.weights) {
      if (w > 0.0 && std::find(ids.begin(), ids.end(), id) == ids.end()) {
        throw ConfigError("strategy '" + s.id + "' weights detector '" + id + "' which is not in config.detectors");
      }
    }
  }
  return a;
}

std::vector<std::string> cmd_calibrate(const RunConfig& cfg) {
  std::vector<std::string> warnings;
  if (!uses(cfg, DetectorKind::Score)) return warnings;
  const auto train = read_labeled(cfg, cfg.train, "train");
  for (const auto& d : cfg.detectors) {
    if (d.kind != DetectorKind::Score) continue;
    const auto map = scores::load_scores(d.source, train);
    const auto profile = scores::calibrate_thresholds(map, train, cfg.calibration_edges, d.source.orientation, d.id);
    for (const auto& w : profile.warnings) warnings.push_back(d.id + ": " + w);
    scores::save_profile(profile, profile_path(cfg, d.id));
  }
  return warnings;
}

std::vector<std::string> cmd_fit(const RunConfig& cfg) {
  const auto train = read_labeled(cfg, cfg.train, "train");
  if (!train.has_both_labels()) throw DataError(cfg.train.string() + ": training data needs both labels");
  auto warnings = cmd_calibrate(cfg);

  Artifacts a;
  if (uses(cfg, DetectorKind::CommonPhrase)) {
    a.lexicon = rules::mine_phrases(train, cfg.phrase_top_k, cfg.phrase_min_len, cfg.phrase_max_len);
    if (a.lexicon.empty()) throw DataError("phrase mining found no discriminative phrase in the training data");
    rules::save_lexicon(a.lexicon, lexicon_path(cfg));
  }
  for (const auto& d : cfg.detectors) {
    if (d.kind == DetectorKind::CommonToken) {
      a.token_tables[d.id] = freq::build_token_table(train, make_tokenizer(d), d.smoothing, d.attribution);
      freq::save_token_table(a.token_tables[d.id], token_table_path(cfg, d.id));
    } else if (d.kind == DetectorKind::Score) {
      a.profiles[d.id] = scores::load_profile(profile_path(cfg, d.id));
    }
  }

  if (cfg.book_source == BookSource::Fit) {
    const auto verdicts = compute_verdicts(cfg, a, train);
    std::vector<double> support_values;
    const bool wants_support = std::any_of(cfg.grids.lambdas.begin(), cfg.grids.lambdas.end(),
                                           [](double l) { return l > 0.0; });
    if (wants_support) {
      if (auto provider = make_support(cfg)) {
        for (const auto& s : train) support_values.push_back(provider->query(s).value);
      }
    }
    const auto book = fit_book(cfg, train, verdicts, support_values, warnings);
    strategy::save_book(book, book_path(cfg));
  }
  return warnings;
}

void cmd_predict(const RunConfig& cfg) {
  const auto input = read_dataset(cfg, cfg.input, "input");
  const auto artifacts = load_artifacts(cfg);
  const auto outcomes = judge_dataset(cfg, artifacts, input);

  std::vector<Label> preds;
  for (const auto& o : outcomes) preds.push_back(file_label(o.decision, cfg.llm_label));
  save_predictions(input, preds, cfg.predictions);

  if (!cfg.audit.empty()) {
    if (cfg.audit.has_parent_path()) fs::create_directories(cfg.audit.parent_path());
    std::ofstream out(cfg.audit, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + cfg.audit.string() + "'");
    for (const auto& o : outcomes) voting::write_audit_line(out, o);
  }
}

eval::EvaluationReport cmd_eval(const RunConfig& cfg) {
  const auto gold = read_labeled(cfg, cfg.input, "input");
  auto preds = align_predictions(gold, load_predictions(cfg.predictions));
  for (auto& p : preds) p = file_label(p, cfg.llm_label);
  const auto report = eval::per_subset_report(gold, preds);

  auto obj = json::parse(eval::report_to_json(report));
  std::string table = eval::report_to_table(report, cfg.system_name);
  if (!cfg.reliability_transforms.empty()) {
    const auto artifacts = load_artifacts(cfg);
    const auto mt = make_mt(cfg);
    const eval::BatchJudge judge = [&](const Dataset& d) {
      std::vector<Label> out;
      for (const auto& o : judge_dataset(cfg, artifacts, d)) out.push_back(o.decision);
      return out;
    };
    const auto rel = eval::estimate_reliability(judge, gold, cfg.reliability_transforms, mt.get());
    obj["reliability"] = {{"value", rel.value},
                          {"correct", rel.correct},
                          {"n_texts", rel.n_texts},
                          {"n_transforms", rel.n_transforms}};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", rel.value);
    table += "\nReliability: " + std::string(buf) + " (" + std::to_string(rel.correct) + "/" +
             std::to_string(rel.n_texts * rel.n_transforms) + ")\n";
  }
  write_text(cfg.report, obj.dump(2) + "\n");
  write_text(cfg.report_table, table);
  return report;
}

void cmd_augment(const RunConfig& cfg) {
  if (cfg.augment_transforms.empty()) throw ConfigError("config.augment.transforms: required key is missing");
  const auto input = read_dataset(cfg, cfg.augment_input.empty() ? cfg.input : cfg.augment_input, "augment.input");
  const auto mt = make_mt(cfg);
  const auto out = augment::build_adversarial_set(input, cfg.augment_transforms, mt.get());
  if (cfg.llm_label == 1) {
    save_dataset(out, cfg.augmented);
    return;
  }
  std::vector<TextSample> flipped;
  for (const auto& s : out) {
    std::optional<Label> gold;
    if (s.gold_label()) gold = file_label(*s.gold_label(), 0);
    flipped.emplace_back(s.id(), s.text(), gold, s.subset());
  }
  save_dataset(Dataset(std::move(flipped)), cfg.augmented);
}

}  // namespace ensemjudge::pipeline
