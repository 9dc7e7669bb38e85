#include "ensemjudge/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "ensemjudge/error.hpp"

namespace ensemjudge::eval {

void ConfusionMatrix::add(Label pred, Label gold) {
  if (gold == Label::LLM) {
    ++(pred == Label::LLM ? tp : fn);
  } else {
    ++(pred == Label::LLM ? fp : tn);
  }
}

ConfusionMatrix ConfusionMatrix::of(std::span<const Label> predictions, std::span<const Label> gold) {
  if (predictions.size() != gold.size()) {
    throw DataError("prediction count " + std::to_string(predictions.size()) + " does not match gold count " +
                    std::to_string(gold.size()));
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(predictions[i], gold[i]);
  return cm;
}

namespace {

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
}

}  // namespace

double f1_llm(const ConfusionMatrix& cm) { return f1(cm.tp, cm.fp, cm.fn); }
// Human as positive: its TP is tn, its FP is fn, its FN is fp.
double f1_human(const ConfusionMatrix& cm) { return f1(cm.tn, cm.fn, cm.fp); }
double macro_f1(const ConfusionMatrix& cm) { return 0.5 * (f1_llm(cm) + f1_human(cm)); }

double macro_f1(std::span<const Label> predictions, std::span<const Label> gold) {
  if (gold.empty()) throw DataError("macro-F1 of an empty set");
  return macro_f1(ConfusionMatrix::of(predictions, gold));
}

EvaluationReport per_subset_report(const Dataset& dataset, std::span<const Label> predictions) {
  if (predictions.size() != dataset.size()) {
    throw DataError("prediction count " + std::to_string(predictions.size()) +
                    " does not match sample count " + std::to_string(dataset.size()));
  }
  if (dataset.empty()) throw DataError("cannot report on an empty dataset");
  ConfusionMatrix overall;
  std::map<std::string, ConfusionMatrix> groups;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    if (!s.gold_label()) throw DataError("sample '" + s.id() + "' has no gold label");
    overall.add(predictions[i], *s.gold_label());
    groups[s.subset().value_or(kUntaggedSubset)].add(predictions[i], *s.gold_label());
  }
  EvaluationReport report;
  report.overall_macro_f1 = macro_f1(overall);
  report.n_total = overall.total();
  for (const auto& [tag, cm] : groups) {
    report.per_subset[tag] = macro_f1(cm);
    report.n_per_subset[tag] = cm.total();
  }
  return report;
}

std::string report_to_json(const EvaluationReport& report) {
  nlohmann::json obj;
  obj["overall_macro_f1"] = report.overall_macro_f1;
  obj["n_total"] = report.n_total;
  obj["per_subset"] = report.per_subset;
  obj["n_per_subset"] = report.n_per_subset;
  return obj.dump(2) + "\n";
}

namespace {

std::vector<std::string> column_order(const EvaluationReport& report) {
  static constexpr std::array<const char*, 8> kCanonical = {
      "normal", "mixed", "paraphrase", "perturbation", "len-64", "len-128", "len-256", "len-512"};
  std::vector<std::string> cols;
  for (const char* tag : kCanonical) {
    if (report.per_subset.contains(tag)) cols.emplace_back(tag);
  }
  for (const auto& [tag, value] : report.per_subset) {
    if (std::find(cols.begin(), cols.end(), tag) == cols.end()) cols.push_back(tag);
  }
  return cols;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string report_to_table(const EvaluationReport& report, const std::string& system_name) {
  const auto cols = column_order(report);
  std::vector<std::string> header{"Model Name", "All"};
  std::vector<std::string> counts{"", std::to_string(report.n_total)};
  std::vector<std::string> row{system_name, fixed4(report.overall_macro_f1)};
  for (const auto& c : cols) {
    header.push_back(c);
    counts.push_back(std::to_string(report.n_per_subset.at(c)));
    row.push_back(fixed4(report.per_subset.at(c)));
  }
  std::vector<std::size_t> widths(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    widths[i] = std::max({header[i].size(), counts[i].size(), row[i].size()});
  }
  std::ostringstream out;
  const auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out << " | ";
      out << cells[i] << std::string(widths[i] - cells[i].size(), ' ');
    }
    out << '\n';
  };
  emit(header);
  emit(counts);
  std::size_t rule = 0;
  for (auto w : widths) rule += w + 3;
  out << std::string(rule - 3, '-') << '\n';
  emit(row);
  return out.str();
}

ReliabilityEstimate estimate_reliability(const BatchJudge& judge, const Dataset& dataset,
                                         std::span<const augment::Transform> transforms, augment::MtClient* mt) {
  if (dataset.empty()) throw DataError("reliability needs a nonempty dataset");
  for (const auto& s : dataset) {
    if (!s.gold_label()) throw DataError("sample '" + s.id() + "' has no gold label");
  }
  const auto transformed = augment::build_adversarial_set(dataset, transforms, mt);
  const auto predictions = judge(transformed);
  if (predictions.size() != transformed.size()) {
    throw DataError("judge returned " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(transformed.size()) + " texts");
  }
  ReliabilityEstimate est;
  est.n_texts = dataset.size();
  est.n_transforms = transforms.size();
  for (std::size_t i = 0; i < transformed.size(); ++i) {
    if (predictions[i] == *transformed[i].gold_label()) ++est.correct;
  }
  est.value = static_cast<double>(est.correct) / static_cast<double>(transformed.size());
  return est;
}

ReliabilityEstimate estimate_reliability(const SampleJudge& judge, const Dataset& dataset,
                                         std::span<const augment::Transform> transforms, augment::MtClient* mt) {
  const BatchJudge batch = [&judge](const Dataset& d) {
    std::vector<Label> out;
    out.reserve(d.size());
    for (const auto& s : d) out.push_back(judge(s));
    return out;
  };
  return estimate_reliability(batch, dataset, transforms, mt);
}

}  // namespace ensemjudge::eval
