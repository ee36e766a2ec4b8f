// SARIF 2.1.0 reader. CWE ids are not a mandated SARIF field, so they are
// pattern-matched out of tags, taxa references and rule relationships in the
// shapes CodeQL, Semgrep, Checkov, KICS and SpotBugs emit.

#include <optional>
#include <regex>
#include <set>

#include "sast_triage/errors.hpp"
#include "sast_triage/ingest.hpp"
#include "sast_triage/serialize.hpp"

namespace sast_triage {
namespace {

const Json* child(const Json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return (it == j.end() || it->is_null()) ? nullptr : &*it;
}

std::optional<std::string> string_at(const Json& j, std::initializer_list<const char*> path) {
  const Json* cur = &j;
  for (const char* key : path) {
    cur = child(*cur, key);
    if (!cur) return std::nullopt;
  }
  if (!cur->is_string()) return std::nullopt;
  return cur->get<std::string>();
}

std::optional<int> cwe_in(std::string_view text) {
  static const std::regex pattern(R"((?:^|[^a-z0-9])cwe[-_:/ ]?0*([1-9][0-9]{0,5}))", std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(text.begin(), text.end(), m, pattern)) return std::stoi(m[1].str());
  return std::nullopt;
}

// Depth-first over every string value in a JSON subtree.
std::optional<int> cwe_in_strings(const Json& j) {
  if (j.is_string()) return cwe_in(j.get_ref<const std::string&>());
  if (j.is_array() || j.is_object()) {
    for (const auto& v : j) {
      if (auto cwe = cwe_in_strings(v)) return cwe;
    }
  }
  return std::nullopt;
}

// Taxa / relationship references: {"id": "79", "toolComponent": {"name": "CWE"}}
// or {"id": "CWE-79"}.
std::optional<int> cwe_in_references(const Json* refs, const char* id_holder) {
  if (!refs || !refs->is_array()) return std::nullopt;
  for (const auto& ref : *refs) {
    const Json* target = id_holder ? child(ref, id_holder) : &ref;
    if (!target) continue;
    auto id = string_at(*target, {"id"});
    if (!id) continue;
    if (auto cwe = cwe_in(*id)) return cwe;
    auto component = string_at(*target, {"toolComponent", "name"});
    if (component && (*component == "CWE" || *component == "cwe")) {
      try {
        int n = std::stoi(*id);
        if (n > 0) return n;
      } catch (const std::exception&) {
      }
    }
  }
  return std::nullopt;
}

struct RuleIndex {
  std::vector<const Json*> by_position;
  std::map<std::string, const Json*> by_id;

  void add(const Json* rules) {
    if (!rules || !rules->is_array()) return;
    for (const auto& r : *rules) {
      by_position.push_back(&r);
      if (auto id = string_at(r, {"id"})) by_id.emplace(*id, &r);
    }
  }
};

std::string strip_file_scheme(std::string uri) {
  if (uri.rfind("file://", 0) == 0) {
    uri.erase(0, 7);
    // file:///abs/path leaves "/abs/path"; file://host/path is not supported.
  }
  return uri;
}

}  // namespace

IngestResult parse_sarif(std::string_view document) {
  Json doc;
  try {
    doc = Json::parse(document.begin(), document.end());
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("invalid SARIF JSON: ") + e.what());
  }
  const Json* runs = child(doc, "runs");
  if (!runs || !runs->is_array()) throw ParseError("invalid SARIF: missing runs array");

  IngestResult result;
  std::set<std::string> ids;
  std::size_t ordinal = 0;

  for (const auto& run : *runs) {
    std::string tool = string_at(run, {"tool", "driver", "name"}).value_or("unknown");
    const Json* driver = child(run, "tool") ? child(*child(run, "tool"), "driver") : nullptr;
    if (driver) {
      auto version = string_at(*driver, {"semanticVersion"});
      if (!version) version = string_at(*driver, {"version"});
      result.report.tool_versions[tool] = version.value_or("");
    }
    if (result.report.generated_at.empty()) {
      if (const Json* inv = child(run, "invocations"); inv && inv->is_array() && !inv->empty()) {
        result.report.generated_at = string_at(inv->front(), {"endTimeUtc"}).value_or("");
      }
    }

    RuleIndex rules;
    if (driver) rules.add(child(*driver, "rules"));
    if (const Json* tool_obj = child(run, "tool")) {
      if (const Json* exts = child(*tool_obj, "extensions"); exts && exts->is_array()) {
        for (const auto& ext : *exts) rules.add(child(ext, "rules"));
      }
    }

    const Json* results = child(run, "results");
    if (!results) continue;
    if (!results->is_array()) throw ParseError("invalid SARIF: results is not an array");

    for (const auto& res : *results) {
      ++ordinal;
      auto skip = [&](std::string reason) { result.skipped.push_back({ordinal, std::move(reason)}); };

      std::optional<std::string> rule_id = string_at(res, {"ruleId"});
      if (!rule_id) rule_id = string_at(res, {"rule", "id"});
      const Json* rule = nullptr;
      if (rule_id) {
        if (auto it = rules.by_id.find(*rule_id); it != rules.by_id.end()) rule = it->second;
      }
      if (!rule) {
        const Json* index = child(res, "ruleIndex");
        if (!index) index = child(res, "rule") ? child(*child(res, "rule"), "index") : nullptr;
        if (index && index->is_number_integer()) {
          auto i = index->get<long long>();
          if (i >= 0 && static_cast<std::size_t>(i) < rules.by_position.size()) rule = rules.by_position[i];
        }
      }
      if (!rule_id && rule) rule_id = string_at(*rule, {"id"});
      if (!rule_id) {
        skip("missing-rule-id");
        continue;
      }

      const Json* locations = child(res, "locations");
      const Json* physical = (locations && locations->is_array() && !locations->empty())
                                 ? child(locations->front(), "physicalLocation")
                                 : nullptr;
      auto uri = physical ? string_at(*physical, {"artifactLocation", "uri"}) : std::nullopt;
      if (!uri || uri->empty()) {
        skip("missing-physical-location");
        continue;
      }

      Finding f;
      f.tool = tool;
      f.category = *rule_id;
      f.file_path = strip_file_scheme(*uri);
      const Json* start_line = child(*physical, "region") ? child(*child(*physical, "region"), "startLine") : nullptr;
      if (start_line && start_line->is_number_integer() && start_line->get<long long>() >= 1) {
        f.line = static_cast<int>(start_line->get<long long>());
      } else {
        f.line = 1;
        result.warnings.push_back("result #" + std::to_string(ordinal) + " has no startLine; using line 1");
      }

      std::optional<int> cwe;
      if (const Json* props = child(res, "properties")) cwe = cwe_in_strings(*props);
      if (!cwe) cwe = cwe_in_references(child(res, "taxa"), nullptr);
      if (!cwe && rule) {
        if (const Json* props = child(*rule, "properties")) cwe = cwe_in_strings(*props);
        if (!cwe) cwe = cwe_in_references(child(*rule, "relationships"), "target");
      }
      if (!cwe) cwe = cwe_in(*rule_id);
      f.cwe_id = cwe.value_or(0);

      if (const Json* logical = child(locations->front(), "logicalLocations");
          logical && logical->is_array() && !logical->empty()) {
        auto name = string_at(logical->front(), {"fullyQualifiedName"});
        if (!name) name = string_at(logical->front(), {"name"});
        f.method_name = name;
      }
      std::optional<std::string> risk = rule ? string_at(*rule, {"shortDescription", "text"}) : std::nullopt;
      if (!risk) risk = string_at(res, {"message", "text"});
      f.risk_type = risk;
      f.language_tag = language_for_path(f.file_path);

      auto guid = string_at(res, {"guid"});
      f.id = guid ? *guid : make_finding_id(f.tool, f.file_path, f.line, f.category, f.cwe_id);
      if (!ids.insert(f.id).second) {
        skip("duplicate");
        continue;
      }
      if (f.cwe_id == 0) result.review_ids.push_back(f.id);
      result.report.findings.push_back(std::move(f));
    }
  }

  for (const auto& s : result.skipped) {
    result.warnings.push_back("result #" + std::to_string(s.ordinal) + " skipped: " + s.reason);
  }
  return result;
}

}  // namespace sast_triage
