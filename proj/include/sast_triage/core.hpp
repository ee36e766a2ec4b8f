#pragma once

// Shared domain types for the triage pipeline and the classification rule
// that turns a decision score into a flag.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sast_triage {

inline constexpr double kMinScore = 0.0;
inline constexpr double kMaxScore = 10.0;

/// One potential weakness reported by a SAST tool, with the context the
/// assessment prompt needs.
struct Finding {
  std::string id;
  std::string tool;
  std::string category;
  int cwe_id = 0;  // 0 = tool supplied no resolvable CWE
  std::string file_path;
  int line = 1;
  std::optional<std::string> method_name;
  std::optional<std::string> risk_type;
  std::string source_text;
  std::optional<std::string> language_tag;
  // Set by ingest when the finding cannot be submitted (e.g. "missing-source").
  std::optional<std::string> unassessable_reason;

  [[nodiscard]] bool assessable() const {
    return !unassessable_reason && !source_text.empty();
  }
  /// Grouping key for per-category metrics: "CWE-<n>" or the raw category.
  [[nodiscard]] std::string category_key() const;

  bool operator==(const Finding&) const = default;
};

struct SecurityReport {
  std::vector<Finding> findings;
  std::map<std::string, std::string> tool_versions;
  std::string generated_at;  // tool-supplied timestamp, may be empty

  bool operator==(const SecurityReport&) const = default;

  [[nodiscard]] const Finding* find(std::string_view id) const;
  /// Throws std::invalid_argument on duplicate ids or a broken Finding invariant.
  void validate() const;
};

struct GroundTruthLabel {
  std::string finding_id;
  bool is_real = false;  // true = genuine weakness (SAST true positive)

  bool operator==(const GroundTruthLabel&) const = default;
};

struct AssessmentRecord {
  std::string finding_id;
  std::string model_id;
  int run_index = 0;
  std::string raw_response;
  double score = 0.0;
  double temperature = 0.0;
  std::string prompt_fingerprint;

  bool operator==(const AssessmentRecord&) const = default;
};

/// A run that produced no usable score. The batch keeps going.
struct AssessmentFailure {
  std::string finding_id;
  std::string model_id;
  int run_index = 0;
  std::string reason;  // missing-source, prompt-too-large, parse-failure, transport, ...
  std::string detail;
  std::string raw_response;

  bool operator==(const AssessmentFailure&) const = default;
};

enum class AggregationRule { Mean, Median, Min, Max };

std::string_view to_string(AggregationRule rule);
/// Throws std::invalid_argument for unknown names.
AggregationRule aggregation_rule_from_string(std::string_view name);

struct ScoreSet {
  std::string finding_id;
  std::string model_id;
  std::vector<double> scores;
  double aggregate = 0.0;
  AggregationRule aggregation_rule = AggregationRule::Mean;
  int requested_runs = 0;
  bool partial = false;

  bool operator==(const ScoreSet&) const = default;
};

enum class Flag { FlaggedVulnerable, FlaggedFalsePositive };

enum class Outcome { AssessTP, AssessFP, AssessTN, AssessFN };

std::string_view to_string(Flag flag);
std::string_view to_string(Outcome outcome);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::optional<std::string> category;  // absent = overall

  [[nodiscard]] std::size_t total() const { return tp + fp + tn + fn; }
  void add(Outcome outcome);

  bool operator==(const ConfusionCounts&) const = default;
};

/// Vulnerable iff score >= threshold.
/// Throws std::invalid_argument when threshold is outside [0, 10].
Flag classify_at_threshold(double score, double threshold);

Outcome outcome_of(Flag flag, const GroundTruthLabel& label);
Outcome outcome_of(Flag flag, bool is_real);

struct ClampedScore {
  double value;
  bool clamped;
};

/// Clamps into [0, 10]; NaN maps to 10 (keep for review).
ClampedScore clamp_score(double raw);

/// Stable id from the fields that identify a finding across re-ingestion.
std::string make_finding_id(std::string_view tool, std::string_view file_path, int line,
                            std::string_view category, int cwe_id);

}  // namespace sast_triage
