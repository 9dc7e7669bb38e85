#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ensemjudge/core.hpp"

namespace ensemjudge::augment {

struct Excerpt {
  std::size_t target_len = 64;
  std::uint64_t seed = 0;
};

struct BackTranslate {
  std::string pivot_language = "en";
  std::string source_language = "zh";
};

struct Identity {};

using Transform = std::variant<Excerpt, BackTranslate, Identity>;

// "excerpt", "back_translate" or "identity"; used as the subset tag.
std::string transform_kind(const Transform& t);

// Contiguous window of exactly target_len scalars at a seeded uniform offset,
// or the text unchanged when it is not longer than target_len. The offset
// stream is keyed by (seed, sample id).
TextSample excerpt(const TextSample& sample, std::size_t target_len, std::uint64_t seed);

class MtClient {
 public:
  virtual ~MtClient() = default;
  // Throws AdapterError on failure.
  virtual std::string translate(const std::string& text, const std::string& src,
                                const std::string& tgt) = 0;
};

// Replays recorded pairs; unrecorded text passes through unchanged.
class StubMtClient : public MtClient {
 public:
  StubMtClient() = default;
  explicit StubMtClient(std::map<std::string, std::string> mapping) : mapping_(std::move(mapping)) {}
  // JSONL {"in", "out"} pairs.
  static StubMtClient from_file(const std::filesystem::path& path);

  std::string translate(const std::string& text, const std::string& src, const std::string& tgt) override;

 private:
  std::map<std::string, std::string> mapping_;
};

// POST {endpoint}/translate {"text","src","tgt"} -> {"text"}.
class HttpMtClient : public MtClient {
 public:
  explicit HttpMtClient(std::string endpoint);
  std::string translate(const std::string& text, const std::string& src, const std::string& tgt) override;

 private:
  std::string endpoint_;
};

// source -> pivot -> source. Failures propagate; originals are never passed
// off as translations.
TextSample back_translate(const TextSample& sample, const BackTranslate& params, MtClient& mt);

TextSample apply_transform(const TextSample& sample, const Transform& t, MtClient* mt);

// Transform-major order: all samples under the first transform, then the
// second, and so on. Throws ConfigError on an empty transform list or a
// back-translation without a client.
Dataset build_adversarial_set(const Dataset& dataset, std::span<const Transform> transforms,
                              MtClient* mt = nullptr);

}  // namespace ensemjudge::augment
