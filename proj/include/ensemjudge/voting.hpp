#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ensemjudge/core.hpp"
#include "ensemjudge/strategy.hpp"

namespace ensemjudge::support {
class SupportProvider;
}

namespace ensemjudge::voting {

struct DetectorVote {
  std::string detector_id;
  double weight = 0.0;
  int vote = 0;

  bool operator==(const DetectorVote&) const = default;
};

struct VoteOutcome {
  std::string sample_id;
  std::string strategy_id;
  double score = 0.0;           // weighted vote sum
  double support_signal = 0.0;  // 0 when support was not consulted
  bool support_consulted = false;
  Label decision = Label::Human;
  std::optional<std::string> override_rule;  // set when an override fired
  std::vector<DetectorVote> per_detector;    // positive-weight detectors only

  bool operator==(const VoteOutcome&) const = default;
};

struct OverrideRule {
  std::string rule_id;
  std::string pattern;  // literal substring
  Label forced_label = Label::LLM;
  bool enabled = false;

  void validate() const;  // throws ConfigError on an empty pattern
};

// Weighted sum over the strategy's positive-weight detectors. Throws
// DataError when one of them has no verdict or more than one.
double compute_score(std::span<const DetectorVerdict> verdicts, const strategy::Strategy& strategy);

// LLM iff score + lambda * support >= tau.
Label decide(double score, double support, double lambda, double tau);

// Throws DataError when support is outside [-1, 1].
Label final_decision(double score, double support, const strategy::Strategy& strategy);

// First enabled rule whose pattern occurs in the text wins.
Label apply_overrides(const TextSample& sample, Label decision, std::span<const OverrideRule> rules,
                      const OverrideRule** fired = nullptr);

struct JudgeInputs {
  const strategy::StrategyBook* book = nullptr;
  support::SupportProvider* support = nullptr;  // optional
  std::span<const OverrideRule> overrides;
  std::optional<double> perplexity;
};

// Strategy assignment, weighted score, gated support query (only when
// lambda > 0 and |s - tau| <= band), the threshold rule, then overrides.
VoteOutcome judge(const TextSample& sample, std::span<const DetectorVerdict> verdicts, const JudgeInputs& inputs);

// Recomputes the weighted sum from the audit trail, in the same order.
double recompute_score(const VoteOutcome& outcome);

// One JSON object per line: id, strategy_id, s, d, y, support_consulted,
// override, detectors[{id, weight, vote}].
void write_audit_line(std::ostream& out, const VoteOutcome& outcome);

}  // namespace ensemjudge::voting
