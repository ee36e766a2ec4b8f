#pragma once

// Single-pass and self-consistency assessment of findings, decision-score
// extraction and score aggregation.

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sast_triage/core.hpp"
#include "sast_triage/gateway.hpp"
#include "sast_triage/promptgen.hpp"
#include "sast_triage/serialize.hpp"

namespace sast_triage {

struct AssessmentConfig {
  std::size_t shots = 3;
  int sc_runs = 5;
  double main_temperature = 0.0;
  double sc_temperature = 0.7;
  AggregationRule aggregation_rule = AggregationRule::Mean;
  std::size_t budget_tokens = kDefaultBudgetTokens;
  int max_output_tokens = 1024;
  std::optional<int> truncation_window;
  bool reask_on_parse_failure = true;

  /// Throws ConfigError.
  void validate() const;
};

/// The response carried no usable "Decision:" value.
class ParseFailure : public std::runtime_error {
 public:
  ParseFailure(const std::string& message, std::string raw_text)
      : std::runtime_error(message), raw_text_(std::move(raw_text)) {}
  [[nodiscard]] const std::string& raw_text() const { return raw_text_; }

 private:
  std::string raw_text_;
};

struct Decision {
  double score = 0.0;  // clamped into [0, 10]
  double raw = 0.0;
  bool clamped = false;
};

/// Reads the number after the last "Decision:" label (case-insensitive;
/// markdown emphasis and quotes around the number are tolerated). A label
/// without a number, or followed by a range such as "0.0 - 10.0", fails.
std::optional<Decision> try_extract_decision(std::string_view raw_response);
/// As above; throws ParseFailure. Logs a warning when the value is clamped.
Decision extract_decision(std::string_view raw_response);

/// Median of an even count is the lower middle value. Throws on empty input.
double aggregate_scores(std::span<const double> scores, AggregationRule rule);

/// Appended to the prompt for the single re-ask after an unparseable answer.
inline constexpr std::string_view kReaskSuffix =
    "\n\nYour previous answer did not end with a decision in the required format. "
    "Answer again and finish with a line of the form \"Decision: <number from 0.0 to 10.0>\".";

using RunResult = std::variant<AssessmentRecord, AssessmentFailure>;

/// One completion at main_temperature, run_index 0. Failures are returned,
/// not thrown. tmpl must already hold config.shots examples.
RunResult assess_finding(const Finding& finding, Gateway& gateway, const AssessmentConfig& config,
                         const PromptTemplate& tmpl);

struct SelfConsistencyResult {
  std::vector<RunResult> runs;  // run_index order
  std::variant<ScoreSet, AssessmentFailure> outcome;
};

/// sc_runs completions at sc_temperature. With fewer than sc_runs usable
/// scores the set is partial; below ceil(sc_runs / 2) the finding fails
/// with reason "insufficient-runs" (run_index -1).
SelfConsistencyResult assess_self_consistency(const Finding& finding, Gateway& gateway,
                                              const AssessmentConfig& config, const PromptTemplate& tmpl,
                                              std::size_t parallel_runs = 1);

enum class AssessMode { Single, SelfConsistency };

struct BatchOptions {
  AssessMode mode = AssessMode::SelfConsistency;
  std::size_t workers = 1;
  /// Finding ids whose result is already persisted for this model.
  std::set<std::string> skip;
};

struct BatchSummary {
  std::size_t assessed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

/// Assesses findings concurrently. on_entries receives each finding's lines
/// in input order, whatever order the workers finish in.
BatchSummary assess_batch(const std::vector<Finding>& findings, Gateway& gateway, const AssessmentConfig& config,
                          const PromptTemplate& tmpl, const BatchOptions& options,
                          const std::function<void(const std::vector<AssessmentEntry>&)>& on_entries);

/// Everything one model said about one finding, folded from JSONL entries.
struct FindingAssessment {
  std::string finding_id;
  std::string model_id;
  std::optional<double> score;  // ScoreSet aggregate, else run-0 record score
  std::vector<double> run_scores;
  std::string explanation;  // raw text of the lowest-index successful run
  std::vector<std::string> failures;
  bool self_consistency = false;
  bool partial = false;
};

/// model id -> finding id -> assessment. Throws ParseError if a ScoreSet's
/// aggregate disagrees with its rule.
std::map<std::string, std::map<std::string, FindingAssessment>> index_assessments(
    const std::vector<AssessmentEntry>& entries);

/// Ids whose terminal entry (score_set for self-consistency, run-0 record
/// otherwise) already exists for model_id.
std::set<std::string> completed_findings(const std::vector<AssessmentEntry>& entries, const std::string& model_id,
                                         AssessMode mode);

}  // namespace sast_triage
