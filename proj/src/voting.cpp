#include "ensemjudge/voting.hpp"

#include <cmath>
#include <ostream>

#include <json.hpp>

#include "ensemjudge/error.hpp"
#include "ensemjudge/support.hpp"

namespace ensemjudge::voting {

void OverrideRule::validate() const {
  if (pattern.empty()) throw ConfigError("override rule '" + rule_id + "' has an empty pattern");
}

namespace {

const DetectorVerdict& verdict_for(std::span<const DetectorVerdict> verdicts, const std::string& detector_id) {
  const DetectorVerdict* found = nullptr;
  for (const auto& v : verdicts) {
    if (v.detector_id() != detector_id) continue;
    if (found != nullptr) throw DataError("more than one verdict from detector '" + detector_id + "'");
    found = &v;
  }
  if (found == nullptr) throw DataError("no verdict from weighted detector '" + detector_id + "'");
  return *found;
}

std::vector<DetectorVote> weighted_votes(std::span<const DetectorVerdict> verdicts,
                                         const strategy::Strategy& strategy) {
  std::vector<DetectorVote> votes;
  for (const auto& [id, w] : strategy.weights) {
    if (w > 0.0) votes.push_back({id, w, verdict_for(verdicts, id).vote()});
  }
  return votes;
}

double sum_votes(std::span<const DetectorVote> votes) {
  double s = 0.0;
  for (const auto& v : votes) s += v.weight * v.vote;
  return s;
}

}  // namespace

double compute_score(std::span<const DetectorVerdict> verdicts, const strategy::Strategy& strategy) {
  return sum_votes(weighted_votes(verdicts, strategy));
}

Label decide(double score, double support, double lambda, double tau) {
  return score + lambda * support >= tau ? Label::LLM : Label::Human;
}

Label final_decision(double score, double support, const strategy::Strategy& strategy) {
  if (!(support >= -1.0 && support <= 1.0)) {
    throw DataError("support signal " + std::to_string(support) + " is outside [-1, 1]");
  }
  return decide(score, support, strategy.lambda, strategy.tau);
}

Label apply_overrides(const TextSample& sample, Label decision, std::span<const OverrideRule> rules,
                      const OverrideRule** fired) {
  for (const auto& rule : rules) {
    if (!rule.enabled || rule.pattern.empty()) continue;
    if (sample.text().find(rule.pattern) != std::string::npos) {
      if (fired != nullptr) *fired = &rule;
      return rule.forced_label;
    }
  }
  return decision;
}

VoteOutcome judge(const TextSample& sample, std::span<const DetectorVerdict> verdicts, const JudgeInputs& inputs) {
  if (inputs.book == nullptr) throw ConfigError("judge needs a strategy book");
  const auto& strat = strategy::assign_strategy(sample, *inputs.book, inputs.perplexity);

  VoteOutcome out;
  out.sample_id = sample.id();
  out.strategy_id = strat.id;
  out.per_detector = weighted_votes(verdicts, strat);
  out.score = sum_votes(out.per_detector);

  if (strat.lambda > 0.0 && inputs.support != nullptr &&
      std::abs(out.score - strat.tau) <= strat.effective_band()) {
    out.support_signal = inputs.support->query(sample).value;
    out.support_consulted = true;
  }
  out.decision = final_decision(out.score, out.support_signal, strat);

  const OverrideRule* fired = nullptr;
  out.decision = apply_overrides(sample, out.decision, inputs.overrides, &fired);
  if (fired != nullptr) out.override_rule = fired->rule_id;
  return out;
}

double recompute_score(const VoteOutcome& outcome) { return sum_votes(outcome.per_detector); }

void write_audit_line(std::ostream& out, const VoteOutcome& outcome) {
  nlohmann::json obj;
  obj["id"] = outcome.sample_id;
  obj["strategy_id"] = outcome.strategy_id;
  obj["s"] = outcome.score;
  obj["d"] = outcome.support_signal;
  obj["y"] = to_int(outcome.decision);
  obj["support_consulted"] = outcome.support_consulted;
  obj["override"] = outcome.override_rule ? nlohmann::json(*outcome.override_rule) : nlohmann::json(nullptr);
  obj["detectors"] = nlohmann::json::array();
  for (const auto& v : outcome.per_detector) {
    obj["detectors"].push_back({{"id", v.detector_id}, {"weight", v.weight}, {"vote", v.vote}});
  }
  out << obj.dump() << '\n';
}

}  // namespace ensemjudge::voting
