#include "sast_triage/serialize.hpp"

#include <cmath>

#include "sast_triage/errors.hpp"

namespace sast_triage {
namespace {

const Json& require(const Json& j, const char* field, int line) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) throw SchemaError(field, "missing", line);
  return *it;
}

std::string require_string(const Json& j, const char* field, int line) {
  const Json& v = require(j, field, line);
  if (!v.is_string()) throw SchemaError(field, "expected string", line);
  return v.get<std::string>();
}

long long require_int(const Json& j, const char* field, int line) {
  const Json& v = require(j, field, line);
  if (!v.is_number_integer()) throw SchemaError(field, "expected integer", line);
  return v.get<long long>();
}

double require_number(const Json& j, const char* field, int line) {
  const Json& v = require(j, field, line);
  if (!v.is_number()) throw SchemaError(field, "expected number", line);
  return v.get<double>();
}

bool require_bool(const Json& j, const char* field, int line) {
  const Json& v = require(j, field, line);
  if (!v.is_boolean()) throw SchemaError(field, "expected boolean", line);
  return v.get<bool>();
}

std::optional<std::string> optional_string(const Json& j, const char* field, int line) {
  auto it = j.find(field);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(field, "expected string", line);
  return it->get<std::string>();
}

void put_optional(Json& j, const char* field, const std::optional<std::string>& value) {
  if (value) j[field] = *value;
}

double require_score(const Json& j, const char* field, int line) {
  double v = require_number(j, field, line);
  if (!(v >= kMinScore && v <= kMaxScore)) throw SchemaError(field, "score outside [0, 10]", line);
  return v;
}

}  // namespace

Json to_json(const Finding& f) {
  Json j = Json::object();
  j["id"] = f.id;
  j["tool"] = f.tool;
  j["category"] = f.category;
  j["cwe_id"] = f.cwe_id;
  j["file_path"] = f.file_path;
  j["line"] = f.line;
  put_optional(j, "method_name", f.method_name);
  put_optional(j, "risk_type", f.risk_type);
  put_optional(j, "language_tag", f.language_tag);
  put_optional(j, "unassessable_reason", f.unassessable_reason);
  if (!f.source_text.empty()) j["source_text"] = f.source_text;
  return j;
}

Finding finding_from_json(const Json& j, int line) {
  if (!j.is_object()) throw SchemaError("<record>", "expected JSON object", line);
  Finding f;
  f.id = require_string(j, "id", line);
  if (f.id.empty()) throw SchemaError("id", "must be non-empty", line);
  f.tool = require_string(j, "tool", line);
  f.category = require_string(j, "category", line);
  long long cwe = require_int(j, "cwe_id", line);
  if (cwe < 0 || cwe > 1'000'000) throw SchemaError("cwe_id", "must be >= 0", line);
  f.cwe_id = static_cast<int>(cwe);
  f.file_path = require_string(j, "file_path", line);
  long long ln = require_int(j, "line", line);
  if (ln < 1 || ln > 100'000'000) throw SchemaError("line", "must be >= 1", line);
  f.line = static_cast<int>(ln);
  f.method_name = optional_string(j, "method_name", line);
  f.risk_type = optional_string(j, "risk_type", line);
  f.language_tag = optional_string(j, "language_tag", line);
  f.unassessable_reason = optional_string(j, "unassessable_reason", line);
  f.source_text = optional_string(j, "source_text", line).value_or("");
  return f;
}

Json to_json(const GroundTruthLabel& label) {
  return Json{{"finding_id", label.finding_id}, {"is_real", label.is_real}};
}

GroundTruthLabel label_from_json(const Json& j, int line) {
  if (!j.is_object()) throw SchemaError("<record>", "expected JSON object", line);
  return GroundTruthLabel{require_string(j, "finding_id", line), require_bool(j, "is_real", line)};
}

Json to_json(const AssessmentRecord& r) {
  Json j = Json::object();
  j["kind"] = "record";
  j["finding_id"] = r.finding_id;
  j["model_id"] = r.model_id;
  j["run_index"] = r.run_index;
  j["score"] = r.score;
  j["temperature"] = r.temperature;
  j["prompt_fingerprint"] = r.prompt_fingerprint;
  j["raw_response"] = r.raw_response;
  return j;
}

Json to_json(const AssessmentFailure& f) {
  Json j = Json::object();
  j["kind"] = "failure";
  j["finding_id"] = f.finding_id;
  j["model_id"] = f.model_id;
  j["run_index"] = f.run_index;
  j["reason"] = f.reason;
  j["detail"] = f.detail;
  j["raw_response"] = f.raw_response;
  return j;
}

Json to_json(const ScoreSet& s) {
  Json j = Json::object();
  j["kind"] = "score_set";
  j["finding_id"] = s.finding_id;
  j["model_id"] = s.model_id;
  j["scores"] = s.scores;
  j["aggregate"] = s.aggregate;
  j["aggregation_rule"] = std::string(to_string(s.aggregation_rule));
  j["requested_runs"] = s.requested_runs;
  j["partial"] = s.partial;
  return j;
}

Json to_json(const ConfusionCounts& c) {
  Json j = Json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
  if (c.category) j["category"] = *c.category;
  return j;
}

Json to_json(const AssessmentEntry& entry) {
  return std::visit([](const auto& e) { return to_json(e); }, entry);
}

AssessmentEntry assessment_entry_from_json(const Json& j, int line) {
  if (!j.is_object()) throw SchemaError("<record>", "expected JSON object", line);
  const std::string kind = require_string(j, "kind", line);
  if (kind == "record") {
    AssessmentRecord r;
    r.finding_id = require_string(j, "finding_id", line);
    r.model_id = require_string(j, "model_id", line);
    r.run_index = static_cast<int>(require_int(j, "run_index", line));
    r.score = require_score(j, "score", line);
    r.temperature = require_number(j, "temperature", line);
    r.prompt_fingerprint = require_string(j, "prompt_fingerprint", line);
    r.raw_response = require_string(j, "raw_response", line);
    return r;
  }
  if (kind == "failure") {
    AssessmentFailure f;
    f.finding_id = require_string(j, "finding_id", line);
    f.model_id = require_string(j, "model_id", line);
    f.run_index = static_cast<int>(require_int(j, "run_index", line));
    f.reason = require_string(j, "reason", line);
    f.detail = optional_string(j, "detail", line).value_or("");
    f.raw_response = optional_string(j, "raw_response", line).value_or("");
    return f;
  }
  if (kind == "score_set") {
    ScoreSet s;
    s.finding_id = require_string(j, "finding_id", line);
    s.model_id = require_string(j, "model_id", line);
    const Json& scores = require(j, "scores", line);
    if (!scores.is_array() || scores.empty()) throw SchemaError("scores", "expected non-empty array", line);
    for (const auto& v : scores) {
      if (!v.is_number()) throw SchemaError("scores", "expected numbers", line);
      double x = v.get<double>();
      if (!(x >= kMinScore && x <= kMaxScore)) throw SchemaError("scores", "score outside [0, 10]", line);
      s.scores.push_back(x);
    }
    s.aggregate = require_score(j, "aggregate", line);
    try {
      s.aggregation_rule = aggregation_rule_from_string(require_string(j, "aggregation_rule", line));
    } catch (const std::invalid_argument& e) {
      throw SchemaError("aggregation_rule", e.what(), line);
    }
    s.requested_runs = static_cast<int>(require_int(j, "requested_runs", line));
    s.partial = require_bool(j, "partial", line);
    return s;
  }
  throw SchemaError("kind", "unknown kind \"" + kind + "\"", line);
}

void write_assessment_jsonl(std::ostream& out, const std::vector<AssessmentEntry>& entries) {
  for (const auto& e : entries) out << to_json(e).dump() << '\n';
}

std::vector<AssessmentEntry> read_assessment_jsonl(std::istream& in) {
  std::vector<AssessmentEntry> entries;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line);
    }
    entries.push_back(assessment_entry_from_json(j, line));
  }
  return entries;
}

void write_labels_jsonl(std::ostream& out, const std::vector<GroundTruthLabel>& labels) {
  for (const auto& l : labels) out << to_json(l).dump() << '\n';
}

const std::string& entry_finding_id(const AssessmentEntry& entry) {
  return std::visit([](const auto& e) -> const std::string& { return e.finding_id; }, entry);
}

const std::string& entry_model_id(const AssessmentEntry& entry) {
  return std::visit([](const auto& e) -> const std::string& { return e.model_id; }, entry);
}

}  // namespace sast_triage
