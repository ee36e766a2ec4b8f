#include "sast_triage/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sast_triage/errors.hpp"
#include "sast_triage/hash.hpp"
#include "sast_triage/ingest.hpp"
#include "sast_triage/mock_backend.hpp"
#include "sast_triage/report.hpp"

namespace fs = std::filesystem;

namespace sast_triage {
namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string safe_name(std::string_view id) {
  std::string out;
  for (char c : id) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' || c == '-' ||
              c == '_';
    out += ok ? c : '_';
  }
  return out;
}

Json input_digest(const fs::path& path) {
  return Json{{"name", path.filename().string()}, {"sha256", sha256_hex(read_file(path))}};
}

SecurityReport load_findings(const fs::path& path) { return parse_canonical_jsonl(read_file(path)); }

std::vector<AssessmentEntry> load_entries(const std::vector<fs::path>& paths) {
  std::vector<AssessmentEntry> all;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    try {
      auto entries = read_assessment_jsonl(in);
      all.insert(all.end(), std::make_move_iterator(entries.begin()), std::make_move_iterator(entries.end()));
    } catch (const ParseError& e) {
      throw ParseError(p.string() + ": " + e.what());
    }
  }
  return all;
}

// --- config --------------------------------------------------------------

void check_keys(const Json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "api_key") {
      throw ConfigError(std::string(where) + ": API keys are read from the environment; set api_key_env instead");
    }
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(where) + ": unknown key \"" + key + "\"");
    }
  }
}

template <typename T>
void read_into(const Json& j, const char* key, T& target, std::string_view where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    target = it->get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string(where) + "." + key + " has the wrong type");
  }
}

fs::path resolve_path(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

ModelEndpoint endpoint_for(std::string model_id, std::string base_url) {
  ModelEndpoint e;
  e.model_id = std::move(model_id);
  e.base_url = std::move(base_url);
  return e;
}

bool is_mock(const ModelEndpoint& e) { return e.base_url.rfind("mock://", 0) == 0; }

AssessMode mode_from_string(const std::string& s) {
  if (s == "single") return AssessMode::Single;
  if (s == "self-consistency" || s == "sc") return AssessMode::SelfConsistency;
  throw ConfigError("unknown assessment mode \"" + s + "\" (expected single or self-consistency)");
}

std::string_view to_string(AssessMode mode) { return mode == AssessMode::Single ? "single" : "self-consistency"; }

ThresholdGrid grid_from_json(const Json& j) {
  if (j.is_string()) return ThresholdGrid::parse(j.get<std::string>());
  if (j.is_array()) {
    ThresholdGrid g;
    for (const auto& v : j) {
      if (!v.is_number()) throw ConfigError("calibration.grid values must be numbers");
      g.values.push_back(v.get<double>());
    }
    g.validate();
    return g;
  }
  throw ConfigError("calibration.grid must be a string or an array");
}

// --- backends --------------------------------------------------------------

std::shared_ptr<ChatBackend> make_backend(const EndpointConfig& ec, CacheMode mode) {
  if (is_mock(ec.endpoint)) {
    if (ec.mock_script) return MockChatBackend::from_script(read_file(*ec.mock_script));
    return std::make_shared<MockChatBackend>();
  }
  if (mode == CacheMode::Replay) return nullptr;
  if (!ec.endpoint.api_key_env.empty()) {
    const char* key = std::getenv(ec.endpoint.api_key_env.c_str());
    if (!key || !*key) {
      throw ConfigError("environment variable " + ec.endpoint.api_key_env + " is not set (needed by " +
                        ec.endpoint.model_id + ")");
    }
  }
  return std::make_shared<HttpChatBackend>();
}

PromptTemplate load_template(const RunConfig& cfg) {
  PromptTemplate base = cfg.template_path ? parse_template(read_file(*cfg.template_path)) : default_template();
  PromptTemplate tmpl;
  try {
    tmpl = base.with_shots(cfg.assessment.shots);
    tmpl.validate(cfg.assessment.shots);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("prompt template: ") + e.what());
  }
  return tmpl;
}

// --- subcommands -------------------------------------------------------------

struct IngestArgs {
  std::string input;
  std::string format;
  std::string out;
  std::string source_root;
  std::string labels;
  std::string labels_out;
  std::string split_out;
  double split_ratio = 0.8;
  std::uint64_t split_seed = 0;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out) {
  const std::string document = read_file(a.input);
  IngestResult result;
  if (a.format == "spotbugs") {
    result = parse_spotbugs_xml(document);
  } else if (a.format == "sarif") {
    result = parse_sarif(document);
  } else {
    result.report = parse_canonical_jsonl(document);
  }
  for (const auto& w : result.warnings) spdlog::warn("{}", w);
  for (const auto& s : result.skipped) spdlog::warn("record {} skipped: {}", s.ordinal, s.reason);

  SecurityReport report = std::move(result.report);
  if (!a.source_root.empty()) report = attach_source(report, SourceRoot(a.source_root));

  std::ostringstream canonical;
  write_canonical_jsonl(canonical, report);
  write_file(a.out, canonical.str());

  std::size_t unassessable = 0;
  for (const auto& f : report.findings) unassessable += !f.assessable();
  out << "findings: " << report.findings.size() << '\n';
  out << "skipped records: " << result.skipped.size() << '\n';
  out << "without CWE (review): " << result.review_ids.size() << '\n';
  if (!a.source_root.empty()) out << "unassessable: " << unassessable << '\n';

  if (!a.labels.empty()) {
    GroundTruthResult gt = load_ground_truth(read_file(a.labels), report);
    for (const auto& w : gt.warnings) spdlog::warn("{}", w);
    fs::path labels_out = a.labels_out.empty() ? fs::path(a.out).replace_extension(".labels.jsonl") : fs::path(a.labels_out);
    std::ostringstream labels;
    write_labels_jsonl(labels, gt.labels);
    write_file(labels_out, labels.str());
    out << "labels matched: " << gt.labels.size() << '\n';
    out << "unmatched label keys: " << gt.unmatched_keys.size() << '\n';
    out << "unlabeled findings: " << gt.unlabeled_findings << '\n';

    if (!a.split_out.empty()) {
      DatasetSplit split = split_dataset(gt.labels, a.split_ratio, a.split_seed);
      Json j{{"schema_version", kSchemaVersion}, {"kind", "split"},  {"seed", split.seed},
             {"ratio", split.ratio},             {"train", split.train}, {"test", split.test}};
      write_file(a.split_out, j.dump(2) + "\n");
      out << "split: " << split.train.size() << " train, " << split.test.size() << " test\n";
    }
  } else if (!a.split_out.empty()) {
    throw ConfigError("--split-out needs --labels");
  }
  return exit_code::kOk;
}

struct AssessArgs {
  std::string config;
  std::string findings;
  std::string out;
  std::string model;
  std::string base_url;
  std::string api_key_env;
  std::string mock_script;
  std::string mode;
  std::string cache_mode;
  std::string cache_dir;
  std::string template_path;
  std::optional<std::size_t> workers;
  std::optional<int> sc_runs;
  std::optional<std::size_t> shots;
  std::optional<std::size_t> budget;
  std::optional<int> truncation_window;
};

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j, fs::path(path).parent_path());
}

int cmd_assess(const AssessArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (!a.mode.empty()) cfg.mode = mode_from_string(a.mode);
  if (!a.cache_mode.empty()) cfg.cache_mode = cache_mode_from_string(a.cache_mode);
  if (!a.cache_dir.empty()) cfg.cache_dir = a.cache_dir;
  if (!a.template_path.empty()) cfg.template_path = a.template_path;
  if (a.workers) cfg.workers = *a.workers;
  if (a.sc_runs) cfg.assessment.sc_runs = *a.sc_runs;
  if (a.shots) cfg.assessment.shots = *a.shots;
  if (a.budget) cfg.assessment.budget_tokens = *a.budget;
  if (a.truncation_window) cfg.assessment.truncation_window = *a.truncation_window;

  if (!a.base_url.empty()) {
    std::string model = a.model.empty() ? std::string("mock") : a.model;
    std::erase_if(cfg.endpoints, [&](const EndpointConfig& e) { return e.endpoint.model_id == model; });
    EndpointConfig ec{endpoint_for(model, a.base_url), std::nullopt};
    ec.endpoint.api_key_env = a.api_key_env;
    if (!a.mock_script.empty()) ec.mock_script = a.mock_script;
    cfg.endpoints.push_back(std::move(ec));
  }
  if (!a.model.empty()) {
    std::erase_if(cfg.endpoints, [&](const EndpointConfig& e) { return e.endpoint.model_id != a.model; });
    if (cfg.endpoints.empty()) throw ConfigError("no endpoint configured for model " + a.model);
  }
  cfg.validate();
  if (cfg.endpoints.empty()) throw ConfigError("no endpoint configured (use --config or --base-url)");

  const SecurityReport report = load_findings(a.findings);
  const PromptTemplate tmpl = load_template(cfg);

  std::vector<AssessmentEntry> existing;
  if (fs::exists(a.out)) existing = load_entries({a.out});
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  std::ofstream sink(a.out, std::ios::binary | std::ios::app);
  if (!sink) throw std::runtime_error("cannot open " + a.out);

  std::optional<ResponseCache> cache;
  if (cfg.cache_dir) cache.emplace(*cfg.cache_dir);

  std::size_t total_failed = 0;
  for (const auto& ec : cfg.endpoints) {
    Gateway gateway(ec.endpoint, make_backend(ec, cfg.cache_mode), cfg.cache_mode, cache);
    BatchOptions options;
    options.mode = cfg.mode;
    options.workers = cfg.workers;
    options.skip = completed_findings(existing, ec.endpoint.model_id, cfg.mode);

    std::size_t done = 0;
    const std::size_t todo = report.findings.size() - options.skip.size();
    BatchSummary summary =
        assess_batch(report.findings, gateway, cfg.assessment, tmpl, options, [&](const auto& entries) {
          for (const auto& e : entries) sink << to_json(e).dump() << '\n';
          sink.flush();
          if (++done % 25 == 0 || done == todo) spdlog::info("{}: {}/{} findings", ec.endpoint.model_id, done, todo);
        });
    GatewayStats stats = gateway.stats();
    out << ec.endpoint.model_id << ": assessed " << summary.assessed << ", skipped " << summary.skipped
        << ", failed " << summary.failed << " (network calls " << stats.network_calls << ", cache hits "
        << stats.cache_hits << ", retries " << stats.retries << ")\n";
    total_failed += summary.failed;
  }
  return total_failed == 0 ? exit_code::kOk : exit_code::kAssessmentFailures;
}

struct CalibrateArgs {
  std::string findings;
  std::vector<std::string> assessments;
  std::string labels;
  std::string model;
  std::string grid;
  std::optional<double> beta;
  std::string split;
  std::string split_part = "test";
  std::string out_dir;
  std::string config;
};

std::vector<fs::path> as_paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  if (!a.grid.empty()) cfg.grid = ThresholdGrid::parse(a.grid);
  if (a.beta) cfg.beta = *a.beta;
  if (!(cfg.beta > 0)) throw ConfigError("beta must be positive");

  const SecurityReport report = load_findings(a.findings);
  GroundTruthResult gt = load_ground_truth(read_file(a.labels), report);
  for (const auto& w : gt.warnings) spdlog::warn("{}", w);
  std::vector<GroundTruthLabel> labels = std::move(gt.labels);
  if (!a.split.empty()) {
    Json split = Json::parse(read_file(a.split));
    std::set<std::string> keep;
    for (const auto& id : split.at(a.split_part)) keep.insert(id.get<std::string>());
    std::erase_if(labels, [&](const GroundTruthLabel& l) { return !keep.contains(l.finding_id); });
  }
  if (labels.empty()) throw CalibrationError("no ground-truth label matches a finding; calibration needs labels");
  LabeledSet labeled = LabeledSet::from(report, labels);

  auto index = index_assessments(load_entries(as_paths(a.assessments)));
  if (!a.model.empty()) {
    std::erase_if(index, [&](const auto& kv) { return kv.first != a.model; });
    if (index.empty()) throw ConfigError("no assessments for model " + a.model);
  }
  if (index.empty()) throw CalibrationError("assessment files hold no results");

  for (const auto& [model, by_finding] : index) {
    ScoreMap scores;
    for (const auto& [id, fa] : by_finding) {
      if (fa.score) scores[id] = *fa.score;
    }
    CalibrationResult r = calibrate(model, labeled.items, scores, cfg.grid, cfg.beta);
    const fs::path base = fs::path(a.out_dir) / ("calibration-" + safe_name(model));
    std::ostringstream csv;
    write_calibration_csv(csv, r);
    write_file(fs::path(base).replace_extension(".csv"), csv.str());
    write_file(fs::path(base).replace_extension(".json"), to_json(r).dump(2) + "\n");

    std::size_t negatives = 0;
    for (const auto& item : r.evaluated) negatives += !item.is_real;
    out << model << ": " << r.evaluated.size() << " evaluated";
    if (r.excluded_unscored) out << ", " << r.excluded_unscored << " labeled without score";
    if (r.conservative_threshold) {
      const auto& row = *std::find_if(r.rows_overall.begin(), r.rows_overall.end(),
                                      [&](const MetricRow& m) { return m.threshold == *r.conservative_threshold; });
      out << "; conservative threshold " << format_threshold(*r.conservative_threshold) << ", tn "
          << row.counts.tn << " of " << negatives << " (tn_ratio " << row.metrics.tn_ratio << ")\n";
    } else {
      out << "; not conservative (fn > 0 at every threshold)\n";
    }
  }
  return exit_code::kOk;
}

struct EnsembleArgs {
  std::vector<std::string> calibrations;
  std::string out_dir;
};

int cmd_ensemble(const EnsembleArgs& a, std::ostream& out) {
  std::vector<CalibrationResult> members;
  for (const auto& p : a.calibrations) {
    Json j;
    try {
      j = Json::parse(read_file(p));
    } catch (const Json::parse_error& e) {
      throw ParseError(p + ": " + e.what());
    }
    members.push_back(calibration_from_json(j));
  }
  EnsembleResult r = ensemble_union(members);
  std::ostringstream csv;
  write_ensemble_csv(csv, r);
  write_file(fs::path(a.out_dir) / "ensemble.csv", csv.str());
  write_file(fs::path(a.out_dir) / "ensemble.json", to_json(r).dump(2) + "\n");

  std::size_t negatives = r.combined_counts.tn + r.combined_counts.fp;
  out << "members:";
  for (const auto& [model, t] : r.member_thresholds) out << ' ' << model << '@' << format_threshold(t);
  out << "\nunion tn: " << r.union_tn_set.size() << " of " << negatives << " (tn_ratio "
      << r.combined_metrics.tn_ratio << "), fn " << r.combined_counts.fn << '\n';
  return exit_code::kOk;
}

struct ReportArgs {
  std::string findings;
  std::vector<std::string> assessments;
  std::vector<std::string> thresholds;
  std::vector<std::string> calibrations;
  std::string out_dir;
  std::string config;
};

double parse_threshold_value(const std::string& s) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("bad threshold \"" + s + "\"");
  }
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
  RunConfig cfg = load_config(a.config);
  const SecurityReport report = load_findings(a.findings);
  auto index = index_assessments(load_entries(as_paths(a.assessments)));

  std::map<std::string, double> thresholds = cfg.thresholds;
  std::map<std::string, std::string> source;
  for (const auto& [m, t] : thresholds) source[m] = "config";
  for (const auto& p : a.calibrations) {
    CalibrationResult r = calibration_from_json(Json::parse(read_file(p)));
    if (!r.conservative_threshold) {
      throw CalibrationError("calibration for " + r.model_id + " has no conservative threshold; pass --threshold");
    }
    thresholds[r.model_id] = *r.conservative_threshold;
    source[r.model_id] = "calibration";
  }
  for (const auto& entry : a.thresholds) {
    auto eq = entry.find('=');
    if (eq == std::string::npos) {
      double t = parse_threshold_value(entry);
      for (const auto& [model, by_finding] : index) {
        thresholds[model] = t;
        source[model] = "flag";
      }
    } else {
      thresholds[entry.substr(0, eq)] = parse_threshold_value(entry.substr(eq + 1));
      source[entry.substr(0, eq)] = "flag";
    }
  }
  for (const auto& [model, by_finding] : index) {
    if (!thresholds.contains(model)) {
      throw ConfigError("no threshold for model " + model + " (pass --threshold or --calibration)");
    }
  }
  std::erase_if(thresholds, [&](const auto& kv) { return !index.contains(kv.first); });

  Json inputs = Json::object();
  inputs["findings"] = input_digest(a.findings);
  inputs["assessments"] = Json::array();
  for (const auto& p : a.assessments) inputs["assessments"].push_back(input_digest(p));
  inputs["calibrations"] = Json::array();
  for (const auto& p : a.calibrations) inputs["calibrations"].push_back(input_digest(p));
  Json snapshot{{"run", to_json(cfg)}, {"threshold_source", source}, {"inputs", inputs}};

  FlaggedReport flagged = build_flagged_report(report, index, thresholds, std::move(snapshot));
  std::ostringstream md;
  write_markdown(md, flagged);
  const fs::path dir(a.out_dir);
  write_file(dir / "report.json", to_json(flagged).dump(2) + "\n");
  write_file(dir / "report.md", md.str());

  auto now = std::chrono::system_clock::now();
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  std::time_t tt = static_cast<std::time_t>(secs);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  Json meta{{"generated_at", stamp}, {"source_generated_at", report.generated_at}};
  write_file(dir / "report.meta.json", meta.dump(2) + "\n");

  out << "report: " << flagged.entries.size() << " findings, " << flagged.count(Flag::FlaggedVulnerable)
      << " for review, " << flagged.count(Flag::FlaggedFalsePositive) << " flagged as false positive\n";
  return exit_code::kOk;
}

}  // namespace

void RunConfig::validate() const {
  assessment.validate();
  grid.validate();
  if (!(beta > 0)) throw ConfigError("beta must be positive");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (cache_mode != CacheMode::Live && !cache_dir) throw ConfigError("record and replay modes need a cache directory");
  std::set<std::string> ids;
  for (const auto& ec : endpoints) {
    const auto& e = ec.endpoint;
    if (e.model_id.empty()) throw ConfigError("endpoint without model_id");
    if (!ids.insert(e.model_id).second) throw ConfigError("duplicate endpoint " + e.model_id);
    if (e.base_url.find("://") == std::string::npos) throw ConfigError(e.model_id + ": base_url needs a scheme");
    if (e.max_retries < 0) throw ConfigError(e.model_id + ": max_retries must be >= 0");
    if (e.requests_per_minute && !(*e.requests_per_minute > 0)) {
      throw ConfigError(e.model_id + ": requests_per_minute must be positive");
    }
  }
  for (const auto& [m, t] : thresholds) {
    if (!(t >= kMinScore && t <= kMaxScore)) throw ConfigError("threshold for " + m + " outside [0, 10]");
  }
}

RunConfig run_config_from_json(const Json& j, const fs::path& base_dir) {
  check_keys(j, "config", {"endpoints", "assessment", "cache", "calibration", "report"});
  RunConfig cfg;

  if (auto it = j.find("endpoints"); it != j.end()) {
    if (!it->is_array()) throw ConfigError("endpoints must be an array");
    for (const auto& e : *it) {
      check_keys(e, "endpoint",
                 {"model_id", "base_url", "wire_model", "api_key_env", "max_retries", "timeout_ms",
                  "backoff_initial_ms", "backoff_max_ms", "requests_per_minute", "supports_system_message",
                  "mock_script"});
      EndpointConfig ec;
      ModelEndpoint& m = ec.endpoint;
      read_into(e, "model_id", m.model_id, "endpoint");
      read_into(e, "base_url", m.base_url, "endpoint");
      read_into(e, "wire_model", m.wire_model, "endpoint");
      read_into(e, "api_key_env", m.api_key_env, "endpoint");
      read_into(e, "max_retries", m.max_retries, "endpoint");
      long long timeout = m.timeout.count();
      long long backoff_initial = m.backoff_initial.count();
      long long backoff_max = m.backoff_max.count();
      read_into(e, "timeout_ms", timeout, "endpoint");
      read_into(e, "backoff_initial_ms", backoff_initial, "endpoint");
      read_into(e, "backoff_max_ms", backoff_max, "endpoint");
      m.timeout = std::chrono::milliseconds(timeout);
      m.backoff_initial = std::chrono::milliseconds(backoff_initial);
      m.backoff_max = std::chrono::milliseconds(backoff_max);
      double rpm = 0;
      read_into(e, "requests_per_minute", rpm, "endpoint");
      if (e.contains("requests_per_minute")) m.requests_per_minute = rpm;
      read_into(e, "supports_system_message", m.supports_system_message, "endpoint");
      std::string script;
      read_into(e, "mock_script", script, "endpoint");
      if (!script.empty()) ec.mock_script = resolve_path(base_dir, script);
      cfg.endpoints.push_back(std::move(ec));
    }
  }

  if (auto it = j.find("assessment"); it != j.end()) {
    check_keys(*it, "assessment",
               {"shots", "sc_runs", "main_temperature", "sc_temperature", "aggregation", "budget_tokens",
                "max_output_tokens", "truncation_window", "reask_on_parse_failure", "mode", "workers", "template"});
    auto& a = cfg.assessment;
    read_into(*it, "shots", a.shots, "assessment");
    read_into(*it, "sc_runs", a.sc_runs, "assessment");
    read_into(*it, "main_temperature", a.main_temperature, "assessment");
    read_into(*it, "sc_temperature", a.sc_temperature, "assessment");
    read_into(*it, "budget_tokens", a.budget_tokens, "assessment");
    read_into(*it, "max_output_tokens", a.max_output_tokens, "assessment");
    read_into(*it, "reask_on_parse_failure", a.reask_on_parse_failure, "assessment");
    read_into(*it, "workers", cfg.workers, "assessment");
    int window = -1;
    read_into(*it, "truncation_window", window, "assessment");
    if (window >= 0) a.truncation_window = window;
    std::string s;
    read_into(*it, "aggregation", s, "assessment");
    if (!s.empty()) {
      try {
        a.aggregation_rule = aggregation_rule_from_string(s);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    s.clear();
    read_into(*it, "mode", s, "assessment");
    if (!s.empty()) cfg.mode = mode_from_string(s);
    s.clear();
    read_into(*it, "template", s, "assessment");
    if (!s.empty()) cfg.template_path = resolve_path(base_dir, s);
  }

  if (auto it = j.find("cache"); it != j.end()) {
    check_keys(*it, "cache", {"mode", "dir"});
    std::string s;
    read_into(*it, "mode", s, "cache");
    if (!s.empty()) cfg.cache_mode = cache_mode_from_string(s);
    s.clear();
    read_into(*it, "dir", s, "cache");
    if (!s.empty()) cfg.cache_dir = resolve_path(base_dir, s);
  }

  if (auto it = j.find("calibration"); it != j.end()) {
    check_keys(*it, "calibration", {"grid", "beta"});
    if (it->contains("grid")) cfg.grid = grid_from_json(it->at("grid"));
    read_into(*it, "beta", cfg.beta, "calibration");
  }

  if (auto it = j.find("report"); it != j.end()) {
    check_keys(*it, "report", {"thresholds"});
    read_into(*it, "thresholds", cfg.thresholds, "report");
  }

  cfg.validate();
  return cfg;
}

Json to_json(const RunConfig& c) {
  Json endpoints = Json::array();
  for (const auto& ec : c.endpoints) {
    const auto& e = ec.endpoint;
    Json j{{"model_id", e.model_id},
           {"base_url", e.base_url},
           {"wire_model", e.wire_model},
           {"api_key_env", e.api_key_env},
           {"max_retries", e.max_retries},
           {"timeout_ms", e.timeout.count()},
           {"supports_system_message", e.supports_system_message}};
    if (e.requests_per_minute) j["requests_per_minute"] = *e.requests_per_minute;
    if (ec.mock_script) j["mock_script"] = ec.mock_script->filename().string();
    endpoints.push_back(std::move(j));
  }
  const auto& a = c.assessment;
  Json assessment{{"shots", a.shots},
                  {"sc_runs", a.sc_runs},
                  {"main_temperature", a.main_temperature},
                  {"sc_temperature", a.sc_temperature},
                  {"aggregation", std::string(to_string(a.aggregation_rule))},
                  {"budget_tokens", a.budget_tokens},
                  {"max_output_tokens", a.max_output_tokens},
                  {"truncation_window", a.truncation_window ? Json(*a.truncation_window) : Json(nullptr)},
                  {"reask_on_parse_failure", a.reask_on_parse_failure},
                  {"mode", std::string(to_string(c.mode))},
                  {"template", c.template_path ? c.template_path->filename().string() : std::string("built-in")}};
  return Json{{"endpoints", endpoints},
              {"assessment", assessment},
              {"cache", {{"mode", std::string(to_string(c.cache_mode))}}},
              {"calibration", {{"grid", c.grid.values}, {"beta", c.beta}}},
              {"report", {{"thresholds", c.thresholds}}}};
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Triage SAST findings with LLM decision scores and conservative thresholds."};
  app.name("sast-triage");
  app.require_subcommand(1);
  app.fallthrough();  // -v/-q are accepted after the subcommand too
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log errors");

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Convert a SAST report into canonical findings JSONL");
  ingest->add_option("-i,--input", ia.input, "SAST report")->required()->check(CLI::ExistingFile);
  ingest->add_option("-f,--format", ia.format, "spotbugs, sarif or canonical")
      ->required()
      ->check(CLI::IsMember({"spotbugs", "sarif", "canonical"}));
  ingest->add_option("-o,--out", ia.out, "Canonical findings JSONL")->required();
  ingest->add_option("--source-root", ia.source_root, "Directory the report's file paths are relative to")
      ->check(CLI::ExistingDirectory);
  ingest->add_option("--labels", ia.labels, "Ground truth (CSV or JSONL)")->check(CLI::ExistingFile);
  ingest->add_option("--labels-out", ia.labels_out, "Matched labels JSONL (default: <out>.labels.jsonl)");
  ingest->add_option("--split-out", ia.split_out, "Write a seeded train/test split of the labeled findings");
  ingest->add_option("--split-ratio", ia.split_ratio, "Train share")->check(CLI::Range(0.0, 1.0));
  ingest->add_option("--split-seed", ia.split_seed, "Shuffle seed");

  AssessArgs aa;
  auto* assess = app.add_subcommand("assess", "Score findings with one or more models");
  assess->add_option("-c,--config", aa.config, "JSON config")->check(CLI::ExistingFile);
  assess->add_option("--findings", aa.findings, "Canonical findings JSONL")->required()->check(CLI::ExistingFile);
  assess->add_option("-o,--out", aa.out, "Assessment JSONL (appended; existing results are skipped)")->required();
  assess->add_option("--model", aa.model, "Only this model (or the id for --base-url)");
  assess->add_option("--base-url", aa.base_url, "Chat-completions base URL; mock:// for the built-in mock");
  assess->add_option("--api-key-env", aa.api_key_env, "Environment variable holding the API key");
  assess->add_option("--mock-script", aa.mock_script, "Responses for a mock:// endpoint")->check(CLI::ExistingFile);
  assess->add_option("--mode", aa.mode, "single or self-consistency")
      ->check(CLI::IsMember({"single", "self-consistency", "sc"}));
  assess->add_option("--cache-mode", aa.cache_mode, "live, record or replay")
      ->check(CLI::IsMember({"live", "record", "replay"}));
  assess->add_option("--cache-dir", aa.cache_dir, "Response cache directory");
  assess->add_option("--template", aa.template_path, "Prompt template file")->check(CLI::ExistingFile);
  assess->add_option("--workers", aa.workers, "Concurrent findings")->check(CLI::PositiveNumber);
  assess->add_option("--sc-runs", aa.sc_runs, "Self-consistency runs")->check(CLI::PositiveNumber);
  assess->add_option("--shots", aa.shots, "Few-shot examples to include");
  assess->add_option("--budget", aa.budget, "Prompt token budget")->check(CLI::PositiveNumber);
  assess->add_option("--truncation-window", aa.truncation_window,
                     "Cut over-budget sources to this many lines around the finding")
      ->check(CLI::NonNegativeNumber);

  CalibrateArgs ca;
  auto* cal = app.add_subcommand("calibrate", "Sweep thresholds against ground truth");
  cal->add_option("-c,--config", ca.config, "JSON config")->check(CLI::ExistingFile);
  cal->add_option("--findings", ca.findings, "Canonical findings JSONL")->required()->check(CLI::ExistingFile);
  cal->add_option("--assessments", ca.assessments, "Assessment JSONL files")->required()->check(CLI::ExistingFile);
  cal->add_option("--labels", ca.labels, "Ground truth (CSV or JSONL)")->required()->check(CLI::ExistingFile);
  cal->add_option("--model", ca.model, "Only this model");
  cal->add_option("--grid", ca.grid, "Thresholds: \"1,2,3\" or \"start:stop:step\"");
  cal->add_option("--beta", ca.beta, "F-beta weight (default 2)");
  cal->add_option("--split", ca.split, "Split file from ingest")->check(CLI::ExistingFile);
  cal->add_option("--split-part", ca.split_part, "train or test")->check(CLI::IsMember({"train", "test"}));
  cal->add_option("--out-dir", ca.out_dir, "Output directory")->required();

  EnsembleArgs ea;
  auto* ens = app.add_subcommand("ensemble", "Union of conservative false-positive flags");
  ens->add_option("--calibration", ea.calibrations, "calibration-<model>.json files")
      ->required()
      ->check(CLI::ExistingFile);
  ens->add_option("--out-dir", ea.out_dir, "Output directory")->required();

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "Write the flagged report (JSON and markdown)");
  rep->add_option("-c,--config", ra.config, "JSON config")->check(CLI::ExistingFile);
  rep->add_option("--findings", ra.findings, "Canonical findings JSONL")->required()->check(CLI::ExistingFile);
  rep->add_option("--assessments", ra.assessments, "Assessment JSONL files")->required()->check(CLI::ExistingFile);
  rep->add_option("--threshold", ra.thresholds, "MODEL=T, or T for every model");
  rep->add_option("--calibration", ra.calibrations, "Use the conservative threshold from these files")
      ->check(CLI::ExistingFile);
  rep->add_option("--out-dir", ra.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? exit_code::kOk : exit_code::kUsage;
  }

  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);

  try {
    if (ingest->parsed()) return cmd_ingest(ia, out);
    if (assess->parsed()) return cmd_assess(aa, out);
    if (cal->parsed()) return cmd_calibrate(ca, out);
    if (ens->parsed()) return cmd_ensemble(ea, out);
    if (rep->parsed()) return cmd_report(ra, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return exit_code::kUsage;
  } catch (const PathTraversalError& e) {
    err << "input error: " << e.what() << '\n';
    return exit_code::kParse;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return exit_code::kParse;
  } catch (const Json::exception& e) {
    err << "parse error: " << e.what() << '\n';
    return exit_code::kParse;
  } catch (const CacheMissError& e) {
    err << "cache error: " << e.what() << '\n';
    return exit_code::kTransport;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << '\n';
    return exit_code::kTransport;
  } catch (const CalibrationError& e) {
    err << "calibration error: " << e.what() << '\n';
    return exit_code::kCalibration;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::kFailure;
  }
  return exit_code::kUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("sast-triage");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace sast_triage
