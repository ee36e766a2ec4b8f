#pragma once

// The flagged report handed to human reviewers: findings split into those
// needing review and those flagged as false positives.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sast_triage/assessment.hpp"
#include "sast_triage/core.hpp"
#include "sast_triage/serialize.hpp"

namespace sast_triage {

enum class ReportStatus { Assessed, Failed, Unassessed };

std::string_view to_string(ReportStatus status);

struct ReportEntry {
  Finding finding;  // source_text is not carried into the report
  Flag flag = Flag::FlaggedVulnerable;
  ReportStatus status = ReportStatus::Unassessed;
  std::map<std::string, double> model_scores;
  std::vector<std::string> flagged_fp_by;
  std::vector<std::string> failures;  // "<model>: <reason>"
  std::string explanation_excerpt;

  /// Highest score across models; sort key for the markdown.
  [[nodiscard]] std::optional<double> max_score() const;
};

struct FlaggedReport {
  std::map<std::string, double> thresholds;  // model id -> threshold
  Json config_snapshot;
  std::vector<ReportEntry> entries;  // report order

  [[nodiscard]] std::size_t count(Flag flag) const;
};

inline constexpr std::size_t kExcerptLength = 240;

/// A finding is flagged FP iff some model with a score for it scores below
/// that model's threshold. Findings no model scored stay flagged vulnerable.
/// Throws ConfigError when a model in `thresholds` has no assessments, or
/// assessments exist for a model without a threshold.
FlaggedReport build_flagged_report(const SecurityReport& report,
                                   const std::map<std::string, std::map<std::string, FindingAssessment>>& index,
                                   const std::map<std::string, double>& thresholds, Json config_snapshot);

/// First kExcerptLength bytes (UTF-8 safe) with line breaks flattened.
std::string excerpt(std::string_view text, std::size_t limit = kExcerptLength);

Json to_json(const FlaggedReport& report);
void write_markdown(std::ostream& out, const FlaggedReport& report);

}  // namespace sast_triage
