#pragma once

// Readers for SAST report formats and ground-truth label files, plus source
// attachment and the train/test split.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "sast_triage/core.hpp"

namespace sast_triage {

/// A record the parser could not turn into a Finding. ordinal is the 1-based
/// position of the record (BugInstance / SARIF result) in the document.
struct SkippedRecord {
  std::size_t ordinal = 0;
  std::string reason;
};

struct IngestResult {
  SecurityReport report;
  std::vector<SkippedRecord> skipped;
  std::vector<std::string> review_ids;  // findings that carry cwe_id 0
  std::vector<std::string> warnings;
};

/// SpotBugs BugCollection XML (FindSecBugs plugin output included).
/// Throws ParseError with line/column on malformed XML.
IngestResult parse_spotbugs_xml(std::string_view document);

/// SARIF 2.1.0. Throws ParseError for invalid JSON or a missing runs array.
IngestResult parse_sarif(std::string_view document);

/// Canonical findings JSONL. Throws SchemaError naming line and field.
SecurityReport parse_canonical_jsonl(std::string_view document);

/// Inverse of parse_canonical_jsonl. An empty report writes nothing; otherwise
/// a report_header line precedes one line per finding.
void write_canonical_jsonl(std::ostream& out, const SecurityReport& report);

enum class LabelFormat { Auto, Csv, Jsonl };

struct GroundTruthResult {
  std::vector<GroundTruthLabel> labels;  // report order
  std::vector<std::string> unmatched_keys;
  std::size_t unlabeled_findings = 0;
  std::vector<std::string> warnings;
};

/// Keys resolve to findings by exact id first, then by file stem (OWASP
/// Benchmark test names) restricted to the row's CWE when the row has one.
/// Throws ParseError when one finding receives conflicting labels.
GroundTruthResult load_ground_truth(std::string_view document, const SecurityReport& report,
                                    LabelFormat format = LabelFormat::Auto);

class SourceRoot {
 public:
  explicit SourceRoot(std::filesystem::path root_path);

  [[nodiscard]] const std::filesystem::path& path() const { return root_; }

  /// Throws PathTraversalError if the path escapes the root.
  [[nodiscard]] std::filesystem::path resolve(std::string_view file_path) const;

 private:
  std::filesystem::path root_;
};

/// Reason codes set on findings that cannot be assessed.
inline constexpr std::string_view kMissingSource = "missing-source";
inline constexpr std::string_view kEmptySource = "empty-source";
inline constexpr std::string_view kInvalidEncoding = "invalid-encoding";

/// Populates source_text from disk. Missing or undecodable files mark the
/// finding unassessable; a path escaping the root throws PathTraversalError.
SecurityReport attach_source(const SecurityReport& report, const SourceRoot& root);

bool is_valid_utf8(std::string_view text);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
  double ratio = 0.8;
};

/// Seeded Fisher-Yates shuffle; the first floor(ratio * n) ids go to train.
/// The shuffle is platform-independent for a given seed.
DatasetSplit split_dataset(const std::vector<GroundTruthLabel>& labels, double ratio, std::uint64_t seed);

/// Best-effort language tag from a file name ("Java", "TypeScript", "infrastructure file").
std::optional<std::string> language_for_path(std::string_view file_path);

}  // namespace sast_triage
