#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ensemjudge/augment.hpp"
#include "ensemjudge/core.hpp"

namespace ensemjudge::eval {

// LLM is the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  void add(Label pred, Label gold);

  static ConfusionMatrix of(std::span<const Label> predictions, std::span<const Label> gold);
};

// Per-class F1 with 0/0 precision or recall taken as 0.
double f1_llm(const ConfusionMatrix& cm);
double f1_human(const ConfusionMatrix& cm);
double macro_f1(const ConfusionMatrix& cm);

// Throws DataError on length mismatch or empty input.
double macro_f1(std::span<const Label> predictions, std::span<const Label> gold);

inline constexpr const char* kUntaggedSubset = "all-untagged";

struct EvaluationReport {
  double overall_macro_f1 = 0.0;
  std::size_t n_total = 0;
  std::map<std::string, double> per_subset;
  std::map<std::string, std::size_t> n_per_subset;
};

// Every sample needs a gold label.
EvaluationReport per_subset_report(const Dataset& dataset, std::span<const Label> predictions);

std::string report_to_json(const EvaluationReport& report);
// Columns: All, the attack/length subsets in their canonical order, then any
// remaining tags alphabetically.
std::string report_to_table(const EvaluationReport& report, const std::string& system_name);

struct ReliabilityEstimate {
  double value = 0.0;
  std::size_t correct = 0;
  std::size_t n_texts = 0;
  std::size_t n_transforms = 0;
};

using BatchJudge = std::function<std::vector<Label>(const Dataset&)>;
using SampleJudge = std::function<Label(const TextSample&)>;

// Mean correctness of `judge` over every transformed copy of every sample.
ReliabilityEstimate estimate_reliability(const BatchJudge& judge, const Dataset& dataset,
                                         std::span<const augment::Transform> transforms,
                                         augment::MtClient* mt = nullptr);
ReliabilityEstimate estimate_reliability(const SampleJudge& judge, const Dataset& dataset,
                                         std::span<const augment::Transform> transforms,
                                         augment::MtClient* mt = nullptr);

}  // namespace ensemjudge::eval
