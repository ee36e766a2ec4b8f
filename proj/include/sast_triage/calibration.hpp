#pragma once

// Threshold sweeps, metrics, conservative threshold selection and the
// union ensemble over conservative members.

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sast_triage/core.hpp"
#include "sast_triage/serialize.hpp"

namespace sast_triage {

struct LabeledItem {
  std::string finding_id;
  std::string category;  // Finding::category_key()
  bool is_real = false;

  bool operator==(const LabeledItem&) const = default;
};

/// Labels joined with the findings they describe, in report order. Labels
/// for ids absent from the report are dropped and counted.
struct LabeledSet {
  std::vector<LabeledItem> items;
  std::size_t dropped_labels = 0;

  static LabeledSet from(const SecurityReport& report, const std::vector<GroundTruthLabel>& labels);
};

/// Order-independent digest over (finding_id, is_real) pairs.
std::string labels_fingerprint(const std::vector<LabeledItem>& items);

using ScoreMap = std::map<std::string, double>;

struct ThresholdGrid {
  std::vector<double> values;

  /// 1, 2, ..., 9.
  static ThresholdGrid default_grid();
  /// "1,2,3.5" or "start:stop:step" (inclusive stop). Throws ConfigError.
  static ThresholdGrid parse(std::string_view text);
  /// Throws ConfigError unless non-empty, strictly increasing and within [0, 10].
  void validate() const;

  bool operator==(const ThresholdGrid&) const = default;
};

struct Metrics {
  double tpr = 0.0;
  double fpr = 0.0;
  double precision = 0.0;
  double f_beta = 0.0;
  double tn_ratio = 0.0;  // tn / (tn + fp): share of non-real findings filtered

  bool operator==(const Metrics&) const = default;
};

struct MetricRow {
  double threshold = 0.0;
  ConfusionCounts counts;
  Metrics metrics;

  bool operator==(const MetricRow&) const = default;
};

/// Items without a score throw CalibrationError, as does an empty selection
/// after the category filter.
ConfusionCounts confusion_at(const std::vector<LabeledItem>& items, const ScoreMap& scores, double threshold,
                             const std::optional<std::string>& category = std::nullopt);

/// Zero denominators: precision 1.0 (tp+fp=0), tpr 1.0 (tp+fn=0), fpr 0.0
/// (fp+tn=0), tn_ratio 0.0 (tn+fp=0), f_beta 0.0 (P=R=0).
/// Throws std::invalid_argument unless beta > 0.
Metrics metrics_from(const ConfusionCounts& counts, double beta = 2.0);

/// Unweighted mean of each metric. Throws std::invalid_argument on empty input.
Metrics macro_average(const std::vector<Metrics>& per_category);

/// Largest threshold whose overall fn is zero.
std::optional<double> conservative_threshold(const std::vector<MetricRow>& rows);

struct CalibrationResult {
  std::string model_id;
  ThresholdGrid grid;
  double beta = 2.0;
  std::vector<MetricRow> rows_overall;
  std::map<std::string, std::vector<MetricRow>> rows_by_category;
  /// Metrics averaged over categories; counts are the overall counts.
  std::vector<MetricRow> macro_rows;
  std::optional<double> conservative_threshold;
  std::set<std::string> tn_set;  // at the conservative threshold
  std::vector<LabeledItem> evaluated;  // labeled and scored
  ScoreMap scores;                     // restricted to evaluated
  std::string labels_fingerprint;      // of evaluated
  std::size_t excluded_unscored = 0;   // labeled, no score
  std::size_t excluded_unlabeled = 0;  // scored, no label

  bool operator==(const CalibrationResult&) const = default;
};

/// Sweeps the grid over the labeled findings that have a score. Throws
/// CalibrationError when nothing is left to evaluate.
CalibrationResult calibrate(const std::string& model_id, const std::vector<LabeledItem>& labeled,
                            const ScoreMap& scores, const ThresholdGrid& grid, double beta = 2.0);

struct EnsembleResult {
  std::vector<std::string> member_models;
  std::map<std::string, double> member_thresholds;
  std::set<std::string> union_tn_set;
  /// Every evaluated finding flagged FP by at least one member.
  std::set<std::string> union_fp_flagged;
  ConfusionCounts combined_counts;
  Metrics combined_metrics;
  std::map<std::string, ConfusionCounts> counts_by_category;
  Metrics macro_metrics;
  std::string labels_fingerprint;
};

/// A finding is flagged FP iff some member flags it FP at its own
/// conservative threshold. Throws CalibrationError for an empty member
/// list, a member without a conservative threshold (naming it), or members
/// evaluated on different labeled sets.
EnsembleResult ensemble_union(const std::vector<CalibrationResult>& members);

/// model,scope,category,threshold,tp,fp,tn,fn,tpr,fpr,precision,f_beta,tn_ratio
void write_calibration_csv(std::ostream& out, const CalibrationResult& result);
void write_ensemble_csv(std::ostream& out, const EnsembleResult& result);

Json to_json(const CalibrationResult& result);
/// Throws ParseError / SchemaError.
CalibrationResult calibration_from_json(const Json& j);
Json to_json(const EnsembleResult& result);

/// Shortest decimal form that reads back to the same double ("6", "0.5").
std::string format_threshold(double value);

}  // namespace sast_triage
