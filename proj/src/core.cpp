#include "sast_triage/core.hpp"

#include <cmath>
#include <set>

#include "sast_triage/hash.hpp"

namespace sast_triage {

std::string Finding::category_key() const {
  if (cwe_id > 0) return "CWE-" + std::to_string(cwe_id);
  return category.empty() ? std::string("uncategorized") : category;
}

const Finding* SecurityReport::find(std::string_view id) const {
  for (const auto& f : findings) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

void SecurityReport::validate() const {
  std::set<std::string_view> seen;
  for (const auto& f : findings) {
    if (f.id.empty()) throw std::invalid_argument("finding with empty id");
    if (!seen.insert(f.id).second) throw std::invalid_argument("duplicate finding id: " + f.id);
    if (f.line < 1) throw std::invalid_argument("finding " + f.id + ": line must be >= 1");
    if (f.cwe_id < 0) throw std::invalid_argument("finding " + f.id + ": cwe_id must be >= 0");
  }
}

std::string_view to_string(AggregationRule rule) {
  switch (rule) {
    case AggregationRule::Mean: return "mean";
    case AggregationRule::Median: return "median";
    case AggregationRule::Min: return "min";
    case AggregationRule::Max: return "max";
  }
  return "mean";
}

AggregationRule aggregation_rule_from_string(std::string_view name) {
  if (name == "mean") return AggregationRule::Mean;
  if (name == "median") return AggregationRule::Median;
  if (name == "min") return AggregationRule::Min;
  if (name == "max") return AggregationRule::Max;
  throw std::invalid_argument("unknown aggregation rule: " + std::string(name));
}

std::string_view to_string(Flag flag) {
  return flag == Flag::FlaggedVulnerable ? "vulnerable" : "false_positive";
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::AssessTP: return "TP";
    case Outcome::AssessFP: return "FP";
    case Outcome::AssessTN: return "TN";
    case Outcome::AssessFN: return "FN";
  }
  return "TP";
}

void ConfusionCounts::add(Outcome outcome) {
  switch (outcome) {
    case Outcome::AssessTP: ++tp; break;
    case Outcome::AssessFP: ++fp; break;
    case Outcome::AssessTN: ++tn; break;
    case Outcome::AssessFN: ++fn; break;
  }
}

Flag classify_at_threshold(double score, double threshold) {
  if (!(threshold >= kMinScore && threshold <= kMaxScore)) {
    throw std::invalid_argument("threshold must lie in [0, 10]");
  }
  return score >= threshold ? Flag::FlaggedVulnerable : Flag::FlaggedFalsePositive;
}

Outcome outcome_of(Flag flag, bool is_real) {
  if (flag == Flag::FlaggedVulnerable) return is_real ? Outcome::AssessTP : Outcome::AssessFP;
  return is_real ? Outcome::AssessFN : Outcome::AssessTN;
}

Outcome outcome_of(Flag flag, const GroundTruthLabel& label) { return outcome_of(flag, label.is_real); }

ClampedScore clamp_score(double raw) {
  if (std::isnan(raw)) return {kMaxScore, true};
  if (raw < kMinScore) return {kMinScore, true};
  if (raw > kMaxScore) return {kMaxScore, true};
  return {raw, false};
}

std::string make_finding_id(std::string_view tool, std::string_view file_path, int line,
                            std::string_view category, int cwe_id) {
  FieldHasher h;
  h.add(tool).add(file_path).add(static_cast<long long>(line)).add(category).add(static_cast<long long>(cwe_id));
  return "f-" + h.hex().substr(0, 20);
}

}  // namespace sast_triage
