// SpotBugs BugCollection reader, built on expat's streaming interface.
//
// Relevant layout (attributes trimmed):
//
//   <BugCollection version="4.8.3" timestamp="1718000000000">
//     <BugInstance type="XSS_SERVLET" cweid="79" instanceHash="...">
//       <ShortMessage>Potential XSS in Servlet</ShortMessage>
//       <Class classname="org.owasp.benchmark.testcode.BenchmarkTest00001" primary="true">
//         <SourceLine start="1" end="80" sourcepath="org/owasp/.../BenchmarkTest00001.java"/>
//       </Class>
//       <Method name="doPost" primary="true"><SourceLine start="40" end="70" .../></Method>
//       <SourceLine primary="true" start="42" end="42" sourcepath="..."/>
//     </BugInstance>
//     <BugPattern type="XSS_SERVLET" cweid="79"><ShortDescription>...</ShortDescription></BugPattern>
//   </BugCollection>

#include <expat.h>

#include <charconv>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "sast_triage/errors.hpp"
#include "sast_triage/ingest.hpp"

namespace sast_triage {
namespace {

using Attributes = std::map<std::string, std::string>;

struct SourceLineRef {
  std::optional<int> start;
  std::string sourcepath;
  std::string sourcefile;
  bool primary = false;
};

struct RawInstance {
  std::size_t ordinal = 0;
  std::string type;
  std::optional<int> cweid;
  std::string short_message;
  std::vector<SourceLineRef> direct_lines;
  std::optional<SourceLineRef> method_line;
  std::optional<SourceLineRef> class_line;
  std::optional<std::string> method_name;
  bool method_is_primary = false;
};

struct RawPattern {
  std::optional<int> cweid;
  std::string short_description;
};

std::optional<int> parse_int(const std::string& text) {
  int value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) return std::nullopt;
  return value;
}

SourceLineRef source_line_from(const Attributes& attrs) {
  SourceLineRef ref;
  if (auto it = attrs.find("start"); it != attrs.end()) ref.start = parse_int(it->second);
  if (auto it = attrs.find("sourcepath"); it != attrs.end()) ref.sourcepath = it->second;
  if (auto it = attrs.find("sourcefile"); it != attrs.end()) ref.sourcefile = it->second;
  if (auto it = attrs.find("primary"); it != attrs.end()) ref.primary = it->second == "true";
  return ref;
}

class SpotBugsHandler {
 public:
  void start(const std::string& name, Attributes attrs) {
    stack_.push_back(name);
    text_.clear();
    const std::size_t depth = stack_.size();

    if (depth == 1) {
      root_seen_ = true;
      root_ok_ = name == "BugCollection";
      if (auto it = attrs.find("version"); it != attrs.end()) version_ = it->second;
      if (auto it = attrs.find("timestamp"); it != attrs.end()) timestamp_ = it->second;
      return;
    }
    if (!root_ok_) return;

    if (depth == 2 && name == "BugInstance") {
      current_.emplace();
      current_->ordinal = ++instance_count_;
      current_->type = attrs["type"];
      if (auto it = attrs.find("cweid"); it != attrs.end()) current_->cweid = parse_int(it->second);
      return;
    }
    if (depth == 2 && name == "BugPattern") {
      pattern_type_ = attrs["type"];
      RawPattern& p = patterns_[pattern_type_];
      if (auto it = attrs.find("cweid"); it != attrs.end()) p.cweid = parse_int(it->second);
      return;
    }
    if (!current_) return;

    const std::string& parent = stack_[depth - 2];
    if (depth == 3 && name == "SourceLine") {
      current_->direct_lines.push_back(source_line_from(attrs));
    } else if (depth == 3 && name == "Method") {
      bool primary = attrs["primary"] == "true";
      if (!current_->method_name || (primary && !current_->method_is_primary)) {
        current_->method_name = attrs["name"];
        current_->method_is_primary = primary;
        current_->method_line.reset();
      }
    } else if (depth == 4 && name == "SourceLine" && parent == "Method") {
      if (!current_->method_line) current_->method_line = source_line_from(attrs);
    } else if (depth == 4 && name == "SourceLine" && parent == "Class") {
      if (!current_->class_line) current_->class_line = source_line_from(attrs);
    }
  }

  void end(const std::string& name) {
    const std::size_t depth = stack_.size();
    if (root_ok_) {
      if (depth == 3 && current_ && name == "ShortMessage") current_->short_message = text_;
      if (depth == 3 && !pattern_type_.empty() && name == "ShortDescription") {
        patterns_[pattern_type_].short_description = text_;
      }
      if (depth == 2 && name == "BugInstance" && current_) {
        instances_.push_back(std::move(*current_));
        current_.reset();
      }
      if (depth == 2 && name == "BugPattern") pattern_type_.clear();
    }
    stack_.pop_back();
    text_.clear();
  }

  void characters(std::string_view chunk) { text_.append(chunk); }

  IngestResult finish() const;

  bool root_seen_ = false;
  bool root_ok_ = false;

 private:
  std::vector<std::string> stack_;
  std::string text_;
  std::string version_;
  std::string timestamp_;
  std::size_t instance_count_ = 0;
  std::optional<RawInstance> current_;
  std::vector<RawInstance> instances_;
  std::string pattern_type_;
  std::map<std::string, RawPattern> patterns_;
};

std::optional<SourceLineRef> primary_line(const RawInstance& inst) {
  for (const auto& l : inst.direct_lines) {
    if (l.primary) return l;
  }
  if (!inst.direct_lines.empty()) return inst.direct_lines.front();
  if (inst.method_line) return inst.method_line;
  return inst.class_line;
}

IngestResult SpotBugsHandler::finish() const {
  IngestResult result;
  result.report.generated_at = timestamp_;
  result.report.tool_versions["SpotBugs"] = version_;
  std::set<std::string> ids;

  for (const auto& inst : instances_) {
    auto skip = [&](std::string reason) { result.skipped.push_back({inst.ordinal, std::move(reason)}); };
    if (inst.type.empty()) {
      skip("missing-type");
      continue;
    }
    auto line = primary_line(inst);
    if (!line) {
      skip("missing-source-line");
      continue;
    }
    std::string path = !line->sourcepath.empty() ? line->sourcepath : line->sourcefile;
    if (path.empty()) {
      skip("missing-source-path");
      continue;
    }
    if (!line->start || *line->start < 1) {
      skip("missing-line");
      continue;
    }

    Finding f;
    f.tool = "SpotBugs";
    f.category = inst.type;
    auto pattern = patterns_.find(inst.type);
    if (inst.cweid && *inst.cweid > 0) {
      f.cwe_id = *inst.cweid;
    } else if (pattern != patterns_.end() && pattern->second.cweid && *pattern->second.cweid > 0) {
      f.cwe_id = *pattern->second.cweid;
    }
    f.file_path = path;
    f.line = *line->start;
    if (inst.method_name && !inst.method_name->empty()) f.method_name = inst.method_name;
    if (!inst.short_message.empty()) {
      f.risk_type = inst.short_message;
    } else if (pattern != patterns_.end() && !pattern->second.short_description.empty()) {
      f.risk_type = pattern->second.short_description;
    }
    f.language_tag = language_for_path(path);
    f.id = make_finding_id(f.tool, f.file_path, f.line, f.category, f.cwe_id);
    if (!ids.insert(f.id).second) {
      skip("duplicate");
      continue;
    }
    if (f.cwe_id == 0) result.review_ids.push_back(f.id);
    result.report.findings.push_back(std::move(f));
  }

  for (const auto& s : result.skipped) {
    result.warnings.push_back("BugInstance #" + std::to_string(s.ordinal) + " skipped: " + s.reason);
  }
  for (const auto& id : result.review_ids) {
    result.warnings.push_back("finding " + id + " has no CWE id; flagged for review");
  }
  return result;
}

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** atts) {
  Attributes attrs;
  for (int i = 0; atts[i] != nullptr; i += 2) attrs.emplace(atts[i], atts[i + 1]);
  static_cast<SpotBugsHandler*>(user)->start(name, std::move(attrs));
}

void XMLCALL on_end(void* user, const XML_Char* name) { static_cast<SpotBugsHandler*>(user)->end(name); }

void XMLCALL on_text(void* user, const XML_Char* s, int len) {
  static_cast<SpotBugsHandler*>(user)->characters(std::string_view(s, static_cast<std::size_t>(len)));
}

}  // namespace

IngestResult parse_spotbugs_xml(std::string_view document) {
  std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreate("UTF-8"), &XML_ParserFree);
  if (!parser) throw std::runtime_error("cannot allocate XML parser");

  SpotBugsHandler handler;
  XML_SetUserData(parser.get(), &handler);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  XML_SetCharacterDataHandler(parser.get(), on_text);

  if (document.size() > static_cast<std::size_t>(std::numeric_limits<int>::max())) {
    throw ParseError("XML document too large");
  }
  if (XML_Parse(parser.get(), document.data(), static_cast<int>(document.size()), XML_TRUE) == XML_STATUS_ERROR) {
    throw ParseError(std::string("malformed XML: ") + XML_ErrorString(XML_GetErrorCode(parser.get())),
                     static_cast<int>(XML_GetCurrentLineNumber(parser.get())),
                     static_cast<int>(XML_GetCurrentColumnNumber(parser.get())) + 1);
  }
  if (!handler.root_ok_) throw ParseError("not a SpotBugs report: root element is not <BugCollection>");
  return handler.finish();
}

}  // namespace sast_triage
