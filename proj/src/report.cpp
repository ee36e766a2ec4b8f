#include "sast_triage/report.hpp"

#include <algorithm>
#include <ostream>

#include "sast_triage/calibration.hpp"
#include "sast_triage/errors.hpp"

namespace sast_triage {
namespace {

std::string md_cell(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (c == '|') out += "\\|";
    else out += c;
  }
  return out;
}

std::string score_text(const std::optional<double>& s) {
  if (!s) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *s);
  return buf;
}

void write_section(std::ostream& out, const std::vector<const ReportEntry*>& entries) {
  std::map<std::string, std::vector<const ReportEntry*>> groups;
  for (const auto* e : entries) groups[e->finding.category_key()].push_back(e);
  for (auto& [category, group] : groups) {
    std::stable_sort(group.begin(), group.end(), [](const ReportEntry* a, const ReportEntry* b) {
      double sa = a->max_score().value_or(kMaxScore + 1);
      double sb = b->max_score().value_or(kMaxScore + 1);
      if (sa != sb) return sa > sb;
      return a->finding.id < b->finding.id;
    });
    out << "### " << md_cell(category) << " (" << group.size() << ")\n\n";
    out << "| Finding | Location | Score | Status | Explanation |\n";
    out << "|---|---|---|---|---|\n";
    for (const auto* e : group) {
      std::string status(to_string(e->status));
      if (!e->failures.empty()) status += ": " + e->failures.front();
      out << "| " << md_cell(e->finding.id) << " | " << md_cell(e->finding.file_path) << ':' << e->finding.line
          << " | " << score_text(e->max_score()) << " | " << md_cell(status) << " | "
          << md_cell(e->explanation_excerpt) << " |\n";
    }
    out << '\n';
  }
}

}  // namespace

std::string_view to_string(ReportStatus status) {
  switch (status) {
    case ReportStatus::Assessed: return "assessed";
    case ReportStatus::Failed: return "failed";
    case ReportStatus::Unassessed: return "unassessed";
  }
  return "unassessed";
}

std::optional<double> ReportEntry::max_score() const {
  std::optional<double> best;
  for (const auto& [model, score] : model_scores) {
    if (!best || score > *best) best = score;
  }
  return best;
}

std::size_t FlaggedReport::count(Flag flag) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const ReportEntry& e) { return e.flag == flag; }));
}

std::string excerpt(std::string_view text, std::size_t limit) {
  std::string flat;
  bool space = false;
  for (char c : text) {
    if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
      space = !flat.empty();
      continue;
    }
    if (space) flat += ' ';
    space = false;
    flat += c;
  }
  if (flat.size() <= limit) return flat;
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(flat[cut]) & 0xC0) == 0x80) --cut;
  return flat.substr(0, cut) + "...";
}

FlaggedReport build_flagged_report(const SecurityReport& report,
                                   const std::map<std::string, std::map<std::string, FindingAssessment>>& index,
                                   const std::map<std::string, double>& thresholds, Json config_snapshot) {
  for (const auto& [model, by_finding] : index) {
    if (!thresholds.contains(model)) throw ConfigError("no threshold for model " + model);
  }
  for (const auto& [model, t] : thresholds) {
    if (!index.contains(model)) throw ConfigError("no assessments for model " + model);
    if (!(t >= kMinScore && t <= kMaxScore)) throw ConfigError("threshold for " + model + " outside [0, 10]");
  }

  FlaggedReport out;
  out.thresholds = thresholds;
  out.config_snapshot = std::move(config_snapshot);
  for (const auto& f : report.findings) {
    ReportEntry e;
    e.finding = f;
    e.finding.source_text.clear();
    bool any_failure = false;
    for (const auto& [model, threshold] : thresholds) {
      const auto& by_finding = index.at(model);
      auto it = by_finding.find(f.id);
      if (it == by_finding.end()) continue;
      const FindingAssessment& a = it->second;
      if (a.score) {
        e.model_scores[model] = *a.score;
        if (classify_at_threshold(*a.score, threshold) == Flag::FlaggedFalsePositive) {
          e.flagged_fp_by.push_back(model);
        }
        if (e.explanation_excerpt.empty()) e.explanation_excerpt = excerpt(a.explanation);
      } else if (!a.failures.empty()) {
        any_failure = true;
        e.failures.push_back(model + ": " + a.failures.back());
      }
    }
    if (!e.model_scores.empty()) e.status = ReportStatus::Assessed;
    else if (any_failure || f.unassessable_reason) e.status = ReportStatus::Failed;
    if (e.failures.empty() && e.model_scores.empty() && f.unassessable_reason) {
      e.failures.push_back(*f.unassessable_reason);
    }
    e.flag = e.flagged_fp_by.empty() ? Flag::FlaggedVulnerable : Flag::FlaggedFalsePositive;
    out.entries.push_back(std::move(e));
  }
  return out;
}

Json to_json(const FlaggedReport& report) {
  Json j = Json::object();
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "flagged_report";
  Json models = Json::array();
  for (const auto& [model, t] : report.thresholds) models.push_back(Json{{"model_id", model}, {"threshold", t}});
  j["models"] = std::move(models);
  j["config"] = report.config_snapshot;
  std::size_t failed = 0;
  std::size_t unassessed = 0;
  for (const auto& e : report.entries) {
    failed += e.status == ReportStatus::Failed;
    unassessed += e.status == ReportStatus::Unassessed;
  }
  j["summary"] = Json{{"total", report.entries.size()},
                      {"for_review", report.count(Flag::FlaggedVulnerable)},
                      {"false_positive", report.count(Flag::FlaggedFalsePositive)},
                      {"failed", failed},
                      {"unassessed", unassessed}};
  Json findings = Json::array();
  for (const auto& e : report.entries) {
    Json f = to_json(e.finding);
    f["category_key"] = e.finding.category_key();
    f["flag"] = std::string(to_string(e.flag));
    f["status"] = std::string(to_string(e.status));
    auto max = e.max_score();
    f["score"] = max ? Json(*max) : Json(nullptr);
    f["model_scores"] = e.model_scores;
    f["flagged_fp_by"] = e.flagged_fp_by;
    if (!e.failures.empty()) f["failures"] = e.failures;
    f["explanation_excerpt"] = e.explanation_excerpt;
    findings.push_back(std::move(f));
  }
  j["findings"] = std::move(findings);
  return j;
}

void write_markdown(std::ostream& out, const FlaggedReport& report) {
  std::vector<const ReportEntry*> review;
  std::vector<const ReportEntry*> dismissed;
  for (const auto& e : report.entries) (e.flag == Flag::FlaggedVulnerable ? review : dismissed).push_back(&e);

  out << "# Flagged security report\n\n";
  out << "Models:";
  for (const auto& [model, t] : report.thresholds) out << ' ' << model << " (threshold " << format_threshold(t) << ')';
  out << "\n\n";
  out << report.entries.size() << " findings: " << review.size() << " for review, " << dismissed.size()
      << " flagged as false positive.\n\n";

  out << "## For review\n\n";
  if (review.empty()) {
    out << "> **No findings need review.** Every finding was flagged as a false positive.\n\n";
  } else {
    write_section(out, review);
  }
  out << "## Flagged as false positive\n\n";
  if (dismissed.empty()) {
    out << "_None._\n\n";
  } else {
    write_section(out, dismissed);
  }
}

}  // namespace sast_triage
