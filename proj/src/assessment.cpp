#include "sast_triage/assessment.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <regex>

#include "sast_triage/errors.hpp"
#include "sast_triage/parallel.hpp"

namespace sast_triage {
namespace {

AssessmentFailure make_failure(const Finding& f, const Gateway& gw, int run_index, std::string reason,
                               std::string detail, std::string raw = {}) {
  return AssessmentFailure{f.id, gw.endpoint().model_id, run_index, std::move(reason), std::move(detail),
                           std::move(raw)};
}

// Either the response text or a failure describing why there is none.
std::variant<std::string, AssessmentFailure> request_text(const Finding& f, Gateway& gw,
                                                          const CompletionRequest& request) {
  try {
    return gw.complete(request).text;
  } catch (const CacheMissError& e) {
    return make_failure(f, gw, request.run_index, "cache-miss", e.what());
  } catch (const NonRetryableError& e) {
    return make_failure(f, gw, request.run_index, "rejected", e.what());
  } catch (const ProtocolError& e) {
    return make_failure(f, gw, request.run_index, "protocol", e.what());
  } catch (const TransportError& e) {
    return make_failure(f, gw, request.run_index, "transport", e.what());
  }
}

RunResult run_once(const Finding& f, const RenderedPrompt& prompt, Gateway& gw, const AssessmentConfig& config,
                   double temperature, int run_index) {
  CompletionRequest request{prompt.system_message, prompt.user_message, temperature, config.max_output_tokens,
                            run_index, f.id};
  auto reply = request_text(f, gw, request);
  if (auto* failure = std::get_if<AssessmentFailure>(&reply)) return *failure;
  std::string raw = std::get<std::string>(std::move(reply));
  std::string fingerprint = prompt.fingerprint;

  auto decision = try_extract_decision(raw);
  if (!decision && config.reask_on_parse_failure) {
    request.user_message += kReaskSuffix;
    auto second = request_text(f, gw, request);
    if (auto* failure = std::get_if<AssessmentFailure>(&second)) return *failure;
    raw = std::get<std::string>(std::move(second));
    fingerprint = prompt_fingerprint(request.system_message, request.user_message);
    decision = try_extract_decision(raw);
  }
  if (!decision) return make_failure(f, gw, run_index, "parse-failure", "no parseable decision", raw);
  if (decision->clamped) {
    spdlog::warn("finding {} run {}: decision {} clamped to {}", f.id, run_index, decision->raw, decision->score);
  }
  return AssessmentRecord{f.id, gw.endpoint().model_id, run_index, std::move(raw), decision->score, temperature,
                          std::move(fingerprint)};
}

std::variant<RenderedPrompt, AssessmentFailure> prepare(const Finding& f, Gateway& gw, const AssessmentConfig& config,
                                                        const PromptTemplate& tmpl) {
  if (tmpl.fewshot_examples.size() != config.shots) {
    throw ConfigError("template has " + std::to_string(tmpl.fewshot_examples.size()) + " examples, configured " +
                      std::to_string(config.shots) + " shots");
  }
  if (!f.assessable()) {
    return make_failure(f, gw, 0, f.unassessable_reason.value_or(std::string("missing-source")),
                        "finding has no usable source text");
  }
  RenderOptions options;
  options.budget_tokens = config.budget_tokens;
  options.truncation_window = config.truncation_window;
  try {
    return render_prompt(f, tmpl, options);
  } catch (const PromptError& e) {
    return make_failure(f, gw, 0, e.code(), e.what());
  }
}

}  // namespace

void AssessmentConfig::validate() const {
  if (sc_runs < 1) throw ConfigError("sc_runs must be >= 1");
  if (main_temperature < 0.0 || sc_temperature < 0.0) throw ConfigError("temperatures must be >= 0");
  if (budget_tokens == 0) throw ConfigError("budget_tokens must be positive");
  if (max_output_tokens < 1) throw ConfigError("max_output_tokens must be positive");
  if (truncation_window && *truncation_window < 0) throw ConfigError("truncation window must be >= 0");
}

std::optional<Decision> try_extract_decision(std::string_view raw_response) {
  static const std::regex label(R"(\bdecision\s*\**\s*:)", std::regex::icase);
  static const std::regex value(R"(^[\s*"'`\[]*([-+]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)))");
  static const std::regex range(R"(^\s*(?:-|–|to)\s*[-+]?[0-9])", std::regex::icase);

  using Iter = std::string_view::const_iterator;
  std::optional<Iter> last;
  for (std::regex_iterator<Iter> it(raw_response.begin(), raw_response.end(), label), end; it != end; ++it) {
    last = (*it)[0].second;
  }
  if (!last) return std::nullopt;

  std::match_results<Iter> m;
  if (!std::regex_search(*last, raw_response.end(), m, value, std::regex_constants::match_continuous)) {
    return std::nullopt;
  }
  if (std::regex_search(m[0].second, raw_response.end(), range, std::regex_constants::match_continuous)) {
    return std::nullopt;
  }
  double raw = std::stod(m[1].str());
  ClampedScore c = clamp_score(raw);
  return Decision{c.value, raw, c.clamped};
}

Decision extract_decision(std::string_view raw_response) {
  auto d = try_extract_decision(raw_response);
  if (!d) throw ParseFailure("no parseable \"Decision:\" value in response", std::string(raw_response));
  if (d->clamped) spdlog::warn("decision {} outside [0, 10], clamped to {}", d->raw, d->score);
  return *d;
}

double aggregate_scores(std::span<const double> scores, AggregationRule rule) {
  if (scores.empty()) throw std::invalid_argument("cannot aggregate an empty score list");
  switch (rule) {
    case AggregationRule::Mean:
      return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
    case AggregationRule::Median: {
      std::vector<double> sorted(scores.begin(), scores.end());
      std::sort(sorted.begin(), sorted.end());
      return sorted[(sorted.size() - 1) / 2];
    }
    case AggregationRule::Min:
      return *std::min_element(scores.begin(), scores.end());
    case AggregationRule::Max:
      return *std::max_element(scores.begin(), scores.end());
  }
  throw std::invalid_argument("unknown aggregation rule");
}

RunResult assess_finding(const Finding& finding, Gateway& gateway, const AssessmentConfig& config,
                         const PromptTemplate& tmpl) {
  auto prepared = prepare(finding, gateway, config, tmpl);
  if (auto* failure = std::get_if<AssessmentFailure>(&prepared)) return *failure;
  return run_once(finding, std::get<RenderedPrompt>(prepared), gateway, config, config.main_temperature, 0);
}

SelfConsistencyResult assess_self_consistency(const Finding& finding, Gateway& gateway,
                                              const AssessmentConfig& config, const PromptTemplate& tmpl,
                                              std::size_t parallel_runs) {
  SelfConsistencyResult result;
  auto prepared = prepare(finding, gateway, config, tmpl);
  if (auto* failure = std::get_if<AssessmentFailure>(&prepared)) {
    result.outcome = *failure;
    return result;
  }
  const auto& prompt = std::get<RenderedPrompt>(prepared);
  const int n = config.sc_runs;

  std::vector<std::optional<RunResult>> runs(static_cast<std::size_t>(n));
  parallel_for(runs.size(), parallel_runs, [&](std::size_t i) {
    runs[i] = run_once(finding, prompt, gateway, config, config.sc_temperature, static_cast<int>(i));
  });

  ScoreSet set;
  set.finding_id = finding.id;
  set.model_id = gateway.endpoint().model_id;
  set.aggregation_rule = config.aggregation_rule;
  set.requested_runs = n;
  for (auto& run : runs) {
    if (auto* record = std::get_if<AssessmentRecord>(&*run)) set.scores.push_back(record->score);
    result.runs.push_back(std::move(*run));
  }

  const auto needed = static_cast<std::size_t>((n + 1) / 2);
  if (set.scores.size() < needed) {
    result.outcome = make_failure(finding, gateway, -1, "insufficient-runs",
                                  std::to_string(set.scores.size()) + " of " + std::to_string(n) +
                                      " runs produced a decision");
    return result;
  }
  set.partial = set.scores.size() < static_cast<std::size_t>(n);
  set.aggregate = aggregate_scores(set.scores, set.aggregation_rule);
  result.outcome = std::move(set);
  return result;
}

BatchSummary assess_batch(const std::vector<Finding>& findings, Gateway& gateway, const AssessmentConfig& config,
                          const PromptTemplate& tmpl, const BatchOptions& options,
                          const std::function<void(const std::vector<AssessmentEntry>&)>& on_entries) {
  config.validate();
  BatchSummary summary;
  std::vector<std::optional<std::vector<AssessmentEntry>>> ready(findings.size());
  std::size_t next_to_emit = 0;
  std::mutex mutex;

  auto deliver = [&](std::size_t index, std::vector<AssessmentEntry> entries, bool skipped, bool failed) {
    std::lock_guard lock(mutex);
    if (skipped) ++summary.skipped;
    else ++summary.assessed;
    if (failed) ++summary.failed;
    ready[index] = std::move(entries);
    while (next_to_emit < ready.size() && ready[next_to_emit]) {
      if (!ready[next_to_emit]->empty()) on_entries(*ready[next_to_emit]);
      ready[next_to_emit]->clear();
      ++next_to_emit;
    }
  };

  parallel_for(findings.size(), options.workers, [&](std::size_t i) {
    const Finding& f = findings[i];
    if (options.skip.contains(f.id)) {
      deliver(i, {}, true, false);
      return;
    }
    std::vector<AssessmentEntry> entries;
    bool failed = false;
    if (options.mode == AssessMode::Single) {
      RunResult r = assess_finding(f, gateway, config, tmpl);
      failed = std::holds_alternative<AssessmentFailure>(r);
      std::visit([&](auto&& v) { entries.emplace_back(std::move(v)); }, std::move(r));
    } else {
      SelfConsistencyResult r = assess_self_consistency(f, gateway, config, tmpl);
      for (auto& run : r.runs) std::visit([&](auto&& v) { entries.emplace_back(std::move(v)); }, std::move(run));
      failed = std::holds_alternative<AssessmentFailure>(r.outcome);
      std::visit([&](auto&& v) { entries.emplace_back(std::move(v)); }, std::move(r.outcome));
    }
    deliver(i, std::move(entries), false, failed);
  });
  return summary;
}

std::map<std::string, std::map<std::string, FindingAssessment>> index_assessments(
    const std::vector<AssessmentEntry>& entries) {
  struct Scratch {
    std::optional<double> set_aggregate;
    std::optional<double> single_score;
    bool set_failed = false;  // self-consistency gave up on this finding
    int explanation_run = -1;
  };
  std::map<std::string, std::map<std::string, FindingAssessment>> index;
  std::map<std::pair<std::string, std::string>, Scratch> scratch;

  for (const auto& entry : entries) {
    const std::string& model = entry_model_id(entry);
    const std::string& id = entry_finding_id(entry);
    FindingAssessment& fa = index[model][id];
    fa.finding_id = id;
    fa.model_id = model;
    Scratch& s = scratch[{model, id}];

    if (const auto* r = std::get_if<AssessmentRecord>(&entry)) {
      if (s.explanation_run < 0 || r->run_index <= s.explanation_run) {
        fa.explanation = r->raw_response;
        s.explanation_run = r->run_index;
      }
      if (r->run_index == 0) s.single_score = r->score;
    } else if (const auto* f = std::get_if<AssessmentFailure>(&entry)) {
      fa.failures.push_back(f->reason);
      if (f->run_index < 0) s.set_failed = true;
    } else if (const auto* set = std::get_if<ScoreSet>(&entry)) {
      double expected = aggregate_scores(set->scores, set->aggregation_rule);
      if (std::fabs(expected - set->aggregate) > 1e-9) {
        throw ParseError("score set for " + id + " (" + model + ") has aggregate " + std::to_string(set->aggregate) +
                         ", rule gives " + std::to_string(expected));
      }
      s.set_aggregate = set->aggregate;
      fa.run_scores = set->scores;
      fa.self_consistency = true;
      fa.partial = set->partial;
    }
    if (s.set_aggregate) fa.score = s.set_aggregate;
    else if (!s.set_failed) fa.score = s.single_score;
    else fa.score.reset();
  }
  return index;
}

std::set<std::string> completed_findings(const std::vector<AssessmentEntry>& entries, const std::string& model_id,
                                         AssessMode mode) {
  std::set<std::string> done;
  for (const auto& entry : entries) {
    if (entry_model_id(entry) != model_id) continue;
    if (mode == AssessMode::SelfConsistency && std::holds_alternative<ScoreSet>(entry)) {
      done.insert(entry_finding_id(entry));
    }
    if (mode == AssessMode::Single) {
      if (const auto* r = std::get_if<AssessmentRecord>(&entry); r && r->run_index == 0) done.insert(r->finding_id);
    }
  }
  return done;
}

}  // namespace sast_triage
