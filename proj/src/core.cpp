#include "ensemjudge/core.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ensemjudge/error.hpp"
#include "ensemjudge/utf8.hpp"

namespace ensemjudge {

using nlohmann::json;

Label label_from_int(long long value) {
  if (value == 0) return Label::Human;
  if (value == 1) return Label::LLM;
  throw DataError("label must be 0 or 1, got " + std::to_string(value));
}

const char* label_name(Label label) { return label == Label::LLM ? "llm" : "human"; }

TextSample::TextSample(std::string id, std::string text, std::optional<Label> gold,
                       std::optional<std::string> subset)
    : id_(std::move(id)),
      text_(std::move(text)),
      gold_(gold),
      subset_(std::move(subset)),
      char_length_(utf8::scalar_count(text_)) {}

Dataset::Dataset(std::vector<TextSample> samples) : samples_(std::move(samples)) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(samples_.size());
  for (const auto& s : samples_) {
    if (s.id().empty()) throw DataError("sample with empty id");
    if (!seen.insert(s.id()).second) throw DataError("duplicate id '" + s.id() + "'");
    if (!s.gold_label()) {
      ++counts_.unlabeled;
    } else if (*s.gold_label() == Label::LLM) {
      ++counts_.llm;
    } else {
      ++counts_.human;
    }
  }
}

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

TextSample sample_from_json(const json& obj) {
  if (!obj.is_object()) throw DataError("expected a JSON object");
  auto id_it = obj.find("id");
  if (id_it == obj.end() || !id_it->is_string()) throw DataError("missing string field 'id'");
  auto text_it = obj.find("text");
  if (text_it == obj.end() || !text_it->is_string()) {
    throw DataError("missing string field 'text'");
  }
  std::optional<Label> label;
  if (auto it = obj.find("label"); it != obj.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw DataError("field 'label' must be 0 or 1");
    label = label_from_int(it->get<long long>());
  }
  std::optional<std::string> subset;
  if (auto it = obj.find("subset"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw DataError("field 'subset' must be a string");
    subset = it->get<std::string>();
  }
  return TextSample(id_it->get<std::string>(), text_it->get<std::string>(), label, std::move(subset));
}

}  // namespace

Dataset parse_dataset(std::istream& in) {
  std::vector<TextSample> samples;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      samples.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(samples.back().id()).second) {
      throw DataError("line " + std::to_string(line_no) + ": duplicate id '" +
                      samples.back().id() + "'");
    }
  }
  return Dataset(std::move(samples));
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto in = open_in(path);
  try {
    return parse_dataset(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_dataset(std::ostream& out, const Dataset& dataset) {
  for (const auto& s : dataset) {
    json obj;
    obj["id"] = s.id();
    obj["text"] = s.text();
    if (s.gold_label()) obj["label"] = to_int(*s.gold_label());
    if (s.subset()) obj["subset"] = *s.subset();
    out << obj.dump() << '\n';
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  auto out = open_out(path);
  write_dataset(out, dataset);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_predictions(std::ostream& out, const Dataset& dataset, std::span<const Label> predictions) {
  if (predictions.size() != dataset.size()) {
    throw DataError("prediction count " + std::to_string(predictions.size()) +
                    " does not match sample count " + std::to_string(dataset.size()));
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    json obj;
    obj["id"] = dataset[i].id();
    obj["pred"] = to_int(predictions[i]);
    out << obj.dump() << '\n';
  }
}

void save_predictions(const Dataset& dataset, std::span<const Label> predictions,
                      const std::filesystem::path& path) {
  if (predictions.size() != dataset.size()) {
    throw DataError("prediction count " + std::to_string(predictions.size()) +
                    " does not match sample count " + std::to_string(dataset.size()));
  }
  auto out = open_out(path);
  write_predictions(out, dataset, predictions);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Prediction> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      const auto obj = json::parse(line);
      if (!obj.contains("id") || !obj["id"].is_string()) throw DataError("missing string field 'id'");
      if (!obj.contains("pred") || !obj["pred"].is_number_integer()) {
        throw DataError("missing integer field 'pred'");
      }
      preds.push_back({obj["id"].get<std::string>(), label_from_int(obj["pred"].get<long long>())});
    } catch (const json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return preds;
}

std::vector<Label> align_predictions(const Dataset& dataset, std::span<const Prediction> predictions) {
  std::unordered_map<std::string_view, Label> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, p.pred).second) throw DataError("duplicate prediction for id '" + p.id + "'");
  }
  std::vector<Label> aligned;
  aligned.reserve(dataset.size());
  for (const auto& s : dataset) {
    auto it = by_id.find(s.id());
    if (it == by_id.end()) throw DataError("no prediction for id '" + s.id() + "'");
    aligned.push_back(it->second);
  }
  if (by_id.size() != dataset.size()) {
    throw DataError("prediction file has ids not present in the dataset");
  }
  return aligned;
}

}  // namespace ensemjudge
