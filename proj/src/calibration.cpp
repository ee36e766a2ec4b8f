#include "sast_triage/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "sast_triage/errors.hpp"
#include "sast_triage/hash.hpp"

namespace sast_triage {
namespace {

double ratio(std::size_t num, std::size_t den, double if_zero) {
  return den == 0 ? if_zero : static_cast<double>(num) / static_cast<double>(den);
}

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void csv_row(std::ostream& out, const std::string& model, std::string_view scope, const std::string& category,
             double threshold, const ConfusionCounts& c, const Metrics& m) {
  out << csv_field(model) << ',' << scope << ',' << csv_field(category) << ',' << format_threshold(threshold)
      << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn << ',' << fixed6(m.tpr) << ',' << fixed6(m.fpr)
      << ',' << fixed6(m.precision) << ',' << fixed6(m.f_beta) << ',' << fixed6(m.tn_ratio) << '\n';
}

constexpr std::string_view kCsvHeader = "model,scope,category,threshold,tp,fp,tn,fn,tpr,fpr,precision,f_beta,tn_ratio\n";

Json metrics_json(const Metrics& m) {
  return Json{{"tpr", m.tpr}, {"fpr", m.fpr}, {"precision", m.precision}, {"f_beta", m.f_beta},
              {"tn_ratio", m.tn_ratio}};
}

Json row_json(const MetricRow& r) {
  Json j = Json::object();
  j["threshold"] = r.threshold;
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["tn"] = r.counts.tn;
  j["fn"] = r.counts.fn;
  j["metrics"] = metrics_json(r.metrics);
  return j;
}

double snap(double v) { return std::round(v * 1e9) / 1e9; }

}  // namespace

LabeledSet LabeledSet::from(const SecurityReport& report, const std::vector<GroundTruthLabel>& labels) {
  std::unordered_map<std::string, bool> by_id;
  for (const auto& l : labels) by_id.emplace(l.finding_id, l.is_real);
  LabeledSet set;
  std::size_t matched = 0;
  for (const auto& f : report.findings) {
    auto it = by_id.find(f.id);
    if (it == by_id.end()) continue;
    set.items.push_back(LabeledItem{f.id, f.category_key(), it->second});
    ++matched;
  }
  set.dropped_labels = by_id.size() - matched;
  return set;
}

std::string labels_fingerprint(const std::vector<LabeledItem>& items) {
  std::vector<std::pair<std::string, bool>> pairs;
  pairs.reserve(items.size());
  for (const auto& i : items) pairs.emplace_back(i.finding_id, i.is_real);
  std::sort(pairs.begin(), pairs.end());
  FieldHasher h;
  for (const auto& [id, real] : pairs) h.add(id).add(static_cast<long long>(real));
  return h.hex();
}

ThresholdGrid ThresholdGrid::default_grid() { return ThresholdGrid{{1, 2, 3, 4, 5, 6, 7, 8, 9}}; }

ThresholdGrid ThresholdGrid::parse(std::string_view text) {
  auto number = [&](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("bad threshold grid value \"" + std::string(s) + "\"");
    }
    return v;
  };

  ThresholdGrid grid;
  if (text.find(':') != std::string_view::npos) {
    auto a = text.find(':');
    auto b = text.find(':', a + 1);
    if (b == std::string_view::npos) throw ConfigError("grid range must be start:stop:step");
    double start = number(text.substr(0, a));
    double stop = number(text.substr(a + 1, b - a - 1));
    double step = number(text.substr(b + 1));
    if (!(step > 0)) throw ConfigError("grid step must be positive");
    if (stop < start) throw ConfigError("grid stop is below start");
    for (long i = 0;; ++i) {
      double v = snap(start + static_cast<double>(i) * step);
      if (v > stop + 1e-9) break;
      grid.values.push_back(v);
      if (grid.values.size() > 100'000) throw ConfigError("grid too large");
    }
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto comma = text.find(',', pos);
      if (comma == std::string_view::npos) comma = text.size();
      grid.values.push_back(number(text.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  grid.validate();
  return grid;
}

void ThresholdGrid::validate() const {
  if (values.empty()) throw ConfigError("threshold grid is empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= kMinScore && values[i] <= kMaxScore)) {
      throw ConfigError("threshold " + format_threshold(values[i]) + " outside [0, 10]");
    }
    if (i > 0 && !(values[i] > values[i - 1])) throw ConfigError("threshold grid must be strictly increasing");
  }
}

ConfusionCounts confusion_at(const std::vector<LabeledItem>& items, const ScoreMap& scores, double threshold,
                             const std::optional<std::string>& category) {
  ConfusionCounts counts;
  counts.category = category;
  for (const auto& item : items) {
    if (category && item.category != *category) continue;
    auto it = scores.find(item.finding_id);
    if (it == scores.end()) throw CalibrationError("no score for labeled finding " + item.finding_id);
    counts.add(outcome_of(classify_at_threshold(it->second, threshold), item.is_real));
  }
  if (counts.total() == 0) {
    throw CalibrationError(category ? "no labeled findings in category " + *category
                                    : std::string("no labeled findings to evaluate"));
  }
  return counts;
}

Metrics metrics_from(const ConfusionCounts& c, double beta) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  Metrics m;
  m.tpr = ratio(c.tp, c.tp + c.fn, 1.0);
  m.fpr = ratio(c.fp, c.fp + c.tn, 0.0);
  m.precision = ratio(c.tp, c.tp + c.fp, 1.0);
  m.tn_ratio = ratio(c.tn, c.tn + c.fp, 0.0);
  const double p = m.precision;
  const double r = m.tpr;
  if (p == r) {
    m.f_beta = p;  // the general formula can be off by an ulp here
  } else {
    const double b2 = beta * beta;
    m.f_beta = (1 + b2) * p * r / (b2 * p + r);
  }
  return m;
}

Metrics macro_average(const std::vector<Metrics>& per_category) {
  if (per_category.empty()) throw std::invalid_argument("macro average needs at least one category");
  Metrics sum;
  for (const auto& m : per_category) {
    sum.tpr += m.tpr;
    sum.fpr += m.fpr;
    sum.precision += m.precision;
    sum.f_beta += m.f_beta;
    sum.tn_ratio += m.tn_ratio;
  }
  const auto n = static_cast<double>(per_category.size());
  return Metrics{sum.tpr / n, sum.fpr / n, sum.precision / n, sum.f_beta / n, sum.tn_ratio / n};
}

std::optional<double> conservative_threshold(const std::vector<MetricRow>& rows) {
  std::optional<double> best;
  for (const auto& r : rows) {
    if (r.counts.fn == 0 && (!best || r.threshold > *best)) best = r.threshold;
  }
  return best;
}

CalibrationResult calibrate(const std::string& model_id, const std::vector<LabeledItem>& labeled,
                            const ScoreMap& scores, const ThresholdGrid& grid, double beta) {
  grid.validate();
  CalibrationResult result;
  result.model_id = model_id;
  result.grid = grid;
  result.beta = beta;

  std::set<std::string> labeled_ids;
  for (const auto& item : labeled) {
    labeled_ids.insert(item.finding_id);
    auto it = scores.find(item.finding_id);
    if (it == scores.end()) {
      ++result.excluded_unscored;
      continue;
    }
    result.evaluated.push_back(item);
    result.scores.emplace(it->first, it->second);
  }
  for (const auto& [id, score] : scores) {
    if (!labeled_ids.contains(id)) ++result.excluded_unlabeled;
  }
  if (result.evaluated.empty()) throw CalibrationError("no finding of " + model_id + " is both labeled and scored");
  result.labels_fingerprint = labels_fingerprint(result.evaluated);

  std::set<std::string> categories;
  for (const auto& item : result.evaluated) categories.insert(item.category);

  for (double t : grid.values) {
    ConfusionCounts overall = confusion_at(result.evaluated, result.scores, t);
    result.rows_overall.push_back(MetricRow{t, overall, metrics_from(overall, beta)});
    std::vector<Metrics> per_category;
    for (const auto& cat : categories) {
      ConfusionCounts c = confusion_at(result.evaluated, result.scores, t, cat);
      Metrics m = metrics_from(c, beta);
      per_category.push_back(m);
      result.rows_by_category[cat].push_back(MetricRow{t, c, m});
    }
    result.macro_rows.push_back(MetricRow{t, overall, macro_average(per_category)});
  }

  result.conservative_threshold = conservative_threshold(result.rows_overall);
  if (result.conservative_threshold) {
    for (const auto& item : result.evaluated) {
      Flag flag = classify_at_threshold(result.scores.at(item.finding_id), *result.conservative_threshold);
      if (outcome_of(flag, item.is_real) == Outcome::AssessTN) result.tn_set.insert(item.finding_id);
    }
  }
  return result;
}

EnsembleResult ensemble_union(const std::vector<CalibrationResult>& members) {
  if (members.empty()) throw CalibrationError("ensemble needs at least one member");
  EnsembleResult result;
  const auto& reference = members.front();
  for (const auto& m : members) {
    if (!m.conservative_threshold) {
      throw CalibrationError("model " + m.model_id + " has no conservative threshold (fn > 0 at every grid value)");
    }
    if (m.labels_fingerprint != reference.labels_fingerprint) {
      throw CalibrationError("mixed label sets: " + m.model_id + " was evaluated on different findings than " +
                             reference.model_id);
    }
    result.member_models.push_back(m.model_id);
    result.member_thresholds[m.model_id] = *m.conservative_threshold;
    result.union_tn_set.insert(m.tn_set.begin(), m.tn_set.end());
  }
  result.labels_fingerprint = reference.labels_fingerprint;

  for (const auto& item : reference.evaluated) {
    bool flagged_fp = false;
    for (const auto& m : members) {
      if (classify_at_threshold(m.scores.at(item.finding_id), *m.conservative_threshold) ==
          Flag::FlaggedFalsePositive) {
        flagged_fp = true;
        break;
      }
    }
    if (flagged_fp) result.union_fp_flagged.insert(item.finding_id);
    Outcome o = outcome_of(flagged_fp ? Flag::FlaggedFalsePositive : Flag::FlaggedVulnerable, item.is_real);
    result.combined_counts.add(o);
    auto& cat = result.counts_by_category[item.category];
    cat.category = item.category;
    cat.add(o);
  }
  result.combined_metrics = metrics_from(result.combined_counts, reference.beta);
  std::vector<Metrics> per_category;
  for (const auto& [name, counts] : result.counts_by_category) per_category.push_back(metrics_from(counts, reference.beta));
  result.macro_metrics = macro_average(per_category);
  return result;
}

std::string format_threshold(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_calibration_csv(std::ostream& out, const CalibrationResult& r) {
  out << kCsvHeader;
  for (const auto& row : r.rows_overall) csv_row(out, r.model_id, "overall", "", row.threshold, row.counts, row.metrics);
  for (const auto& row : r.macro_rows) csv_row(out, r.model_id, "macro", "", row.threshold, row.counts, row.metrics);
  for (const auto& [cat, rows] : r.rows_by_category) {
    for (const auto& row : rows) csv_row(out, r.model_id, "category", cat, row.threshold, row.counts, row.metrics);
  }
}

void write_ensemble_csv(std::ostream& out, const EnsembleResult& r) {
  out << kCsvHeader;
  std::string name = "ensemble";
  for (const auto& m : r.member_models) name += "+" + m;
  csv_row(out, name, "overall", "", 0.0, r.combined_counts, r.combined_metrics);
  csv_row(out, name, "macro", "", 0.0, r.combined_counts, r.macro_metrics);
  for (const auto& [cat, counts] : r.counts_by_category) {
    csv_row(out, name, "category", cat, 0.0, counts, metrics_from(counts));
  }
}

Json to_json(const CalibrationResult& r) {
  Json j = Json::object();
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "calibration";
  j["model_id"] = r.model_id;
  j["beta"] = r.beta;
  j["grid"] = r.grid.values;
  j["conservative_threshold"] = r.conservative_threshold ? Json(*r.conservative_threshold) : Json(nullptr);
  j["tn_set"] = r.tn_set;
  j["labels_fingerprint"] = r.labels_fingerprint;
  j["excluded_unscored"] = r.excluded_unscored;
  j["excluded_unlabeled"] = r.excluded_unlabeled;
  Json rows = Json::array();
  for (const auto& row : r.rows_overall) rows.push_back(row_json(row));
  j["rows_overall"] = std::move(rows);
  Json macro = Json::array();
  for (const auto& row : r.macro_rows) macro.push_back(row_json(row));
  j["macro_rows"] = std::move(macro);
  Json by_cat = Json::object();
  for (const auto& [cat, cat_rows] : r.rows_by_category) {
    Json a = Json::array();
    for (const auto& row : cat_rows) a.push_back(row_json(row));
    by_cat[cat] = std::move(a);
  }
  j["rows_by_category"] = std::move(by_cat);
  Json evaluated = Json::array();
  for (const auto& item : r.evaluated) {
    evaluated.push_back(Json{{"finding_id", item.finding_id},
                             {"category", item.category},
                             {"is_real", item.is_real},
                             {"score", r.scores.at(item.finding_id)}});
  }
  j["evaluated"] = std::move(evaluated);
  return j;
}

CalibrationResult calibration_from_json(const Json& j) {
  if (!j.is_object() || j.value("kind", "") != "calibration") {
    throw SchemaError("kind", "expected a calibration document");
  }
  if (j.value("schema_version", 0) != kSchemaVersion) throw SchemaError("schema_version", "unsupported version");
  try {
    std::vector<LabeledItem> items;
    ScoreMap scores;
    for (const auto& e : j.at("evaluated")) {
      items.push_back(LabeledItem{e.at("finding_id").get<std::string>(), e.at("category").get<std::string>(),
                                  e.at("is_real").get<bool>()});
      scores[items.back().finding_id] = e.at("score").get<double>();
    }
    ThresholdGrid grid{j.at("grid").get<std::vector<double>>()};
    CalibrationResult r = calibrate(j.at("model_id").get<std::string>(), items, scores, grid, j.at("beta").get<double>());
    r.excluded_unscored = j.value("excluded_unscored", std::size_t{0});
    r.excluded_unlabeled = j.value("excluded_unlabeled", std::size_t{0});

    const Json& stored = j.at("conservative_threshold");
    std::optional<double> stored_threshold;
    if (!stored.is_null()) stored_threshold = stored.get<double>();
    if (stored_threshold != r.conservative_threshold ||
        j.at("labels_fingerprint").get<std::string>() != r.labels_fingerprint) {
      throw ParseError("calibration document for " + r.model_id + " does not match its own evaluated scores");
    }
    return r;
  } catch (const Json::exception& e) {
    throw ParseError(std::string("malformed calibration document: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("malformed calibration document: ") + e.what());
  }
}

Json to_json(const EnsembleResult& r) {
  Json j = Json::object();
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "ensemble";
  j["member_models"] = r.member_models;
  j["member_thresholds"] = r.member_thresholds;
  j["labels_fingerprint"] = r.labels_fingerprint;
  j["union_tn_set"] = r.union_tn_set;
  j["union_tn_count"] = r.union_tn_set.size();
  j["union_fp_flagged"] = r.union_fp_flagged;
  j["combined_counts"] = to_json(r.combined_counts);
  j["combined_metrics"] = metrics_json(r.combined_metrics);
  j["macro_metrics"] = metrics_json(r.macro_metrics);
  Json by_cat = Json::object();
  for (const auto& [cat, counts] : r.counts_by_category) by_cat[cat] = to_json(counts);
  j["counts_by_category"] = std::move(by_cat);
  return j;
}

}  // namespace sast_triage
