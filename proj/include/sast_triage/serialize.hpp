#pragma once

// Canonical JSON forms of the domain types. Every persisted artifact carries
// schema_version so readers can reject files written by a future layout.

#include <istream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sast_triage/core.hpp"

namespace sast_triage {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

Json to_json(const Finding& finding);
/// line is reported in SchemaError when non-zero.
Finding finding_from_json(const Json& j, int line = 0);

Json to_json(const GroundTruthLabel& label);
GroundTruthLabel label_from_json(const Json& j, int line = 0);

Json to_json(const AssessmentRecord& record);
Json to_json(const AssessmentFailure& failure);
Json to_json(const ScoreSet& set);
Json to_json(const ConfusionCounts& counts);

/// One line of an assessment JSONL file.
using AssessmentEntry = std::variant<AssessmentRecord, AssessmentFailure, ScoreSet>;

Json to_json(const AssessmentEntry& entry);
AssessmentEntry assessment_entry_from_json(const Json& j, int line = 0);

/// Writes one compact JSON object per line.
void write_assessment_jsonl(std::ostream& out, const std::vector<AssessmentEntry>& entries);
std::vector<AssessmentEntry> read_assessment_jsonl(std::istream& in);

void write_labels_jsonl(std::ostream& out, const std::vector<GroundTruthLabel>& labels);

const std::string& entry_finding_id(const AssessmentEntry& entry);
const std::string& entry_model_id(const AssessmentEntry& entry);

}  // namespace sast_triage
