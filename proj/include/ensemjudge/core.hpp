#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ensemjudge {

// LLM-generated text is the positive class and serializes as 1.
enum class Label { Human = 0, LLM = 1 };

constexpr int to_int(Label label) { return label == Label::LLM ? 1 : 0; }
constexpr int to_vote(Label label) { return 2 * to_int(label) - 1; }
Label label_from_int(long long value);  // throws DataError unless 0 or 1
const char* label_name(Label label);    // "llm" / "human"

class TextSample {
 public:
  TextSample(std::string id, std::string text, std::optional<Label> gold = std::nullopt,
             std::optional<std::string> subset = std::nullopt);

  const std::string& id() const { return id_; }
  const std::string& text() const { return text_; }
  const std::optional<Label>& gold_label() const { return gold_; }
  const std::optional<std::string>& subset() const { return subset_; }
  // Unicode scalar values, not bytes.
  std::size_t char_length() const { return char_length_; }

 private:
  std::string id_;
  std::string text_;
  std::optional<Label> gold_;
  std::optional<std::string> subset_;
  std::size_t char_length_ = 0;
};

struct LabelCounts {
  std::size_t human = 0;
  std::size_t llm = 0;
  std::size_t unlabeled = 0;

  bool operator==(const LabelCounts&) const = default;
};

class Dataset {
 public:
  Dataset() = default;
  // Throws DataError naming the first duplicate or empty id.
  explicit Dataset(std::vector<TextSample> samples);

  const std::vector<TextSample>& samples() const { return samples_; }
  const LabelCounts& counts() const { return counts_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const TextSample& operator[](std::size_t i) const { return samples_[i]; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

  bool has_both_labels() const { return counts_.human > 0 && counts_.llm > 0; }

 private:
  std::vector<TextSample> samples_;
  LabelCounts counts_;
};

// One base detector's binary verdict. The vote is derived from the
// prediction so the {Human,LLM} <-> {-1,+1} mapping cannot drift.
class DetectorVerdict {
 public:
  DetectorVerdict(std::string detector_id, Label prediction,
                  std::optional<double> raw_score = std::nullopt)
      : detector_id_(std::move(detector_id)), prediction_(prediction), raw_score_(raw_score) {}

  const std::string& detector_id() const { return detector_id_; }
  Label prediction() const { return prediction_; }
  int vote() const { return to_vote(prediction_); }
  const std::optional<double>& raw_score() const { return raw_score_; }

 private:
  std::string detector_id_;
  Label prediction_;
  std::optional<double> raw_score_;
};

// JSONL with keys id, text, optional label (0|1), optional subset.
Dataset parse_dataset(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

struct Prediction {
  std::string id;
  Label pred;

  bool operator==(const Prediction&) const = default;
};

// JSONL with keys id, pred (0|1), in dataset order.
void write_predictions(std::ostream& out, const Dataset& dataset, std::span<const Label> predictions);
void save_predictions(const Dataset& dataset, std::span<const Label> predictions,
                      const std::filesystem::path& path);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

// Aligns a prediction file with a dataset by id; throws DataError when an id
// is missing or unknown.
std::vector<Label> align_predictions(const Dataset& dataset, std::span<const Prediction> predictions);

}  // namespace ensemjudge
