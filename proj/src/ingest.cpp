#include "sast_triage/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "sast_triage/errors.hpp"
#include "sast_triage/serialize.hpp"

namespace fs = std::filesystem;

namespace sast_triage {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_lines(std::string_view document) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= document.size()) {
    auto nl = document.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < document.size()) lines.emplace_back(document.substr(pos));
      break;
    }
    lines.emplace_back(document.substr(pos, nl - pos));
    pos = nl + 1;
  }
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return lines;
}

// RFC 4180-style field splitting with double-quote escaping.
std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back().push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back().push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back().push_back(c);
    }
  }
  for (auto& f : fields) f = trim(f);
  return fields;
}

std::optional<bool> parse_bool(std::string_view text) {
  std::string t = lower(trim(text));
  if (t == "true" || t == "1" || t == "yes" || t == "real" || t == "tp") return true;
  if (t == "false" || t == "0" || t == "no" || t == "fp") return false;
  return std::nullopt;
}

struct LabelRow {
  int line = 0;
  std::string key;
  bool is_real = false;
  std::optional<int> cwe;
};

std::optional<int> parse_cwe(std::string_view text) {
  std::string t = lower(trim(text));
  if (t.rfind("cwe-", 0) == 0) t.erase(0, 4);
  if (t.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    int v = std::stoi(t, &used);
    if (used != t.size() || v <= 0) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<LabelRow> read_csv_labels(std::string_view document) {
  std::vector<LabelRow> rows;
  int key_col = 0;
  int real_col = -1;  // -1: decide from column count
  int cwe_col = -1;
  bool header_done = false;
  int line_no = 0;
  for (const auto& raw : split_lines(document)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto fields = split_csv(line);

    if (!header_done) {
      header_done = true;
      // A header row is any first row whose label column is not boolean.
      int probe = fields.size() >= 3 ? 2 : 1;
      if (fields.size() < 2 || !parse_bool(fields[probe])) {
        for (int i = 0; i < static_cast<int>(fields.size()); ++i) {
          std::string name = lower(fields[i]);
          if (name == "name" || name == "test name" || name == "finding_id" || name == "id" || name == "key") {
            key_col = i;
          } else if (name == "real" || name == "real vulnerability" || name == "is_real" || name == "label") {
            real_col = i;
          } else if (name == "cwe" || name == "cwe_id") {
            cwe_col = i;
          }
        }
        if (real_col < 0) throw ParseError("ground-truth CSV header has no real/is_real column", line_no);
        continue;
      }
    }

    int rc = real_col;
    int cc = cwe_col;
    if (rc < 0) {
      // OWASP expected-results layout: name, category, real, cwe.
      rc = fields.size() >= 3 ? 2 : 1;
      cc = fields.size() >= 4 ? 3 : -1;
    }
    if (static_cast<int>(fields.size()) <= std::max(key_col, rc)) {
      throw ParseError("ground-truth CSV row has too few columns", line_no);
    }
    auto real = parse_bool(fields[rc]);
    if (!real) throw ParseError("ground-truth CSV: cannot read boolean \"" + fields[rc] + "\"", line_no);
    LabelRow row{line_no, fields[key_col], *real, std::nullopt};
    if (cc >= 0 && cc < static_cast<int>(fields.size())) row.cwe = parse_cwe(fields[cc]);
    if (row.key.empty()) throw ParseError("ground-truth CSV row has an empty key", line_no);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<LabelRow> read_jsonl_labels(std::string_view document) {
  std::vector<LabelRow> rows;
  int line_no = 0;
  for (const auto& raw : split_lines(document)) {
    ++line_no;
    if (trim(raw).empty()) continue;
    Json j;
    try {
      j = Json::parse(raw);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw SchemaError("<record>", "expected JSON object", line_no);
    LabelRow row;
    row.line = line_no;
    for (const char* k : {"finding_id", "key", "name"}) {
      if (auto it = j.find(k); it != j.end() && it->is_string()) {
        row.key = it->get<std::string>();
        break;
      }
    }
    if (row.key.empty()) throw SchemaError("finding_id", "missing", line_no);
    bool found = false;
    for (const char* k : {"is_real", "real"}) {
      if (auto it = j.find(k); it != j.end()) {
        if (!it->is_boolean()) throw SchemaError(k, "expected boolean", line_no);
        row.is_real = it->get<bool>();
        found = true;
        break;
      }
    }
    if (!found) throw SchemaError("is_real", "missing", line_no);
    if (auto it = j.find("cwe"); it != j.end()) {
      if (it->is_number_integer()) row.cwe = it->get<int>();
      else if (it->is_string()) row.cwe = parse_cwe(it->get<std::string>());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::optional<std::string> language_for_path(std::string_view file_path) {
  fs::path p{std::string(file_path)};
  std::string name = p.filename().string();
  std::string ext = lower(p.extension().string());
  if (name == "Dockerfile" || name.rfind("Dockerfile.", 0) == 0) return "infrastructure file";
  static const std::map<std::string, std::string> kByExtension = {
      {".java", "Java"},       {".kt", "Kotlin"},         {".cs", "C#"},
      {".ts", "TypeScript"},   {".tsx", "TypeScript"},    {".js", "JavaScript"},
      {".jsx", "JavaScript"},  {".py", "Python"},         {".go", "Go"},
      {".c", "C"},             {".h", "C"},               {".cpp", "C++"},
      {".cc", "C++"},          {".hpp", "C++"},           {".rb", "Ruby"},
      {".php", "PHP"},         {".yaml", "infrastructure file"},
      {".yml", "infrastructure file"}, {".tf", "infrastructure file"},
      {".json", "infrastructure file"}, {".bicep", "infrastructure file"},
  };
  if (auto it = kByExtension.find(ext); it != kByExtension.end()) return it->second;
  return std::nullopt;
}

SecurityReport parse_canonical_jsonl(std::string_view document) {
  SecurityReport report;
  std::set<std::string> ids;
  int line_no = 0;
  for (const auto& raw : split_lines(document)) {
    ++line_no;
    if (trim(raw).empty()) continue;
    Json j;
    try {
      j = Json::parse(raw);
    } catch (const Json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (j.is_object() && j.contains("kind")) {
      if (j["kind"] != "report_header") throw SchemaError("kind", "unexpected record kind", line_no);
      if (auto it = j.find("schema_version"); it != j.end() && *it != kSchemaVersion) {
        throw SchemaError("schema_version", "unsupported version", line_no);
      }
      if (auto it = j.find("tool_versions"); it != j.end()) {
        if (!it->is_object()) throw SchemaError("tool_versions", "expected object", line_no);
        for (auto& [tool, version] : it->items()) {
          if (!version.is_string()) throw SchemaError("tool_versions", "expected string values", line_no);
          report.tool_versions[tool] = version.get<std::string>();
        }
      }
      if (auto it = j.find("generated_at"); it != j.end() && it->is_string()) {
        report.generated_at = it->get<std::string>();
      }
      continue;
    }
    Finding f = finding_from_json(j, line_no);
    if (!ids.insert(f.id).second) throw SchemaError("id", "duplicate id " + f.id, line_no);
    report.findings.push_back(std::move(f));
  }
  return report;
}

void write_canonical_jsonl(std::ostream& out, const SecurityReport& report) {
  if (report.findings.empty()) return;
  Json header = Json::object();
  header["kind"] = "report_header";
  header["schema_version"] = kSchemaVersion;
  header["tool_versions"] = report.tool_versions;
  header["generated_at"] = report.generated_at;
  out << header.dump() << '\n';
  for (const auto& f : report.findings) out << to_json(f).dump() << '\n';
}

GroundTruthResult load_ground_truth(std::string_view document, const SecurityReport& report, LabelFormat format) {
  if (format == LabelFormat::Auto) {
    auto first = document.find_first_not_of(" \t\r\n");
    format = (first != std::string_view::npos && document[first] == '{') ? LabelFormat::Jsonl : LabelFormat::Csv;
  }
  std::vector<LabelRow> rows =
      format == LabelFormat::Jsonl ? read_jsonl_labels(document) : read_csv_labels(document);

  std::map<std::string, std::size_t> by_id;
  std::multimap<std::string, std::size_t> by_stem;
  for (std::size_t i = 0; i < report.findings.size(); ++i) {
    const Finding& f = report.findings[i];
    by_id.emplace(f.id, i);
    by_stem.emplace(fs::path(f.file_path).stem().string(), i);
  }

  std::vector<std::optional<bool>> assigned(report.findings.size());
  GroundTruthResult result;
  auto assign = [&](std::size_t index, const LabelRow& row) {
    auto& slot = assigned[index];
    if (slot && *slot != row.is_real) {
      throw ParseError("conflicting ground-truth labels for finding " + report.findings[index].id, row.line);
    }
    slot = row.is_real;
  };

  for (const auto& row : rows) {
    if (auto it = by_id.find(row.key); it != by_id.end()) {
      assign(it->second, row);
      continue;
    }
    bool matched = false;
    auto [lo, hi] = by_stem.equal_range(row.key);
    for (auto it = lo; it != hi; ++it) {
      const Finding& f = report.findings[it->second];
      if (row.cwe && f.cwe_id != *row.cwe) continue;
      assign(it->second, row);
      matched = true;
    }
    if (!matched) result.unmatched_keys.push_back(row.key);
  }

  for (std::size_t i = 0; i < assigned.size(); ++i) {
    if (assigned[i]) {
      result.labels.push_back({report.findings[i].id, *assigned[i]});
    } else {
      ++result.unlabeled_findings;
    }
  }
  if (result.unlabeled_findings > 0) {
    result.warnings.push_back(std::to_string(result.unlabeled_findings) + " of " +
                              std::to_string(report.findings.size()) + " findings have no ground-truth label");
  }
  return result;
}

SourceRoot::SourceRoot(fs::path root_path) : root_(fs::weakly_canonical(fs::absolute(root_path))) {
  if (!root_.has_filename() && root_.has_parent_path() && root_ != root_.root_path()) root_ = root_.parent_path();
}

fs::path SourceRoot::resolve(std::string_view file_path) const {
  if (file_path.empty()) throw PathTraversalError("empty source path");
  fs::path rel{std::string(file_path)};
  fs::path candidate = rel.is_absolute() ? rel : root_ / rel;
  fs::path resolved = fs::weakly_canonical(candidate.lexically_normal());
  auto [root_end, _] = std::mismatch(root_.begin(), root_.end(), resolved.begin(), resolved.end());
  if (root_end != root_.end()) {
    throw PathTraversalError("path escapes source root: " + std::string(file_path));
  }
  return resolved;
}

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  while (i < n) {
    unsigned char c = s[i];
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (s[i + k] & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

SecurityReport attach_source(const SecurityReport& report, const SourceRoot& root) {
  SecurityReport out = report;
  for (auto& f : out.findings) {
    fs::path path = root.resolve(f.file_path);
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
      f.source_text.clear();
      f.unassessable_reason = std::string(kMissingSource);
      continue;
    }
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (!in.good() && !in.eof()) {
      f.source_text.clear();
      f.unassessable_reason = std::string(kMissingSource);
      continue;
    }
    std::string text = buffer.str();
    if (text.empty()) {
      f.source_text.clear();
      f.unassessable_reason = std::string(kEmptySource);
    } else if (!is_valid_utf8(text)) {
      f.source_text.clear();
      f.unassessable_reason = std::string(kInvalidEncoding);
    } else {
      f.source_text = std::move(text);
      f.unassessable_reason.reset();
    }
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<GroundTruthLabel>& labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");
  if (labels.empty()) throw std::invalid_argument("cannot split an empty label set");

  std::vector<std::string> ids;
  ids.reserve(labels.size());
  for (const auto& l : labels) ids.push_back(l.finding_id);

  // std::uniform_int_distribution is implementation-defined, so bounded
  // draws use rejection sampling on the (fully specified) mt19937_64 stream.
  std::mt19937_64 engine(seed);
  auto bounded = [&engine](std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = 0;
    do {
      draw = engine();
    } while (draw >= limit);
    return draw % bound;
  };
  for (std::size_t i = ids.size() - 1; i > 0; --i) {
    std::swap(ids[i], ids[bounded(i + 1)]);
  }

  const auto train_size = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(ids.size())));
  DatasetSplit split;
  split.seed = seed;
  split.ratio = ratio;
  split.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(train_size));
  split.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(train_size), ids.end());
  return split;
}

}  // namespace sast_triage
