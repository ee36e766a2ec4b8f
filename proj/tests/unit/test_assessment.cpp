#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "sast_triage/assessment.hpp"
#include "sast_triage/errors.hpp"
#include "sast_triage/mock_backend.hpp"
#include "support.hpp"

using namespace sast_triage;
using namespace std::chrono_literals;

namespace {

Finding finding(std::string id) {
  Finding f;
  f.id = std::move(id);
  f.tool = "SpotBugs";
  f.category = "XSS_SERVLET";
  f.cwe_id = 79;
  f.file_path = "A.java";
  f.line = 2;
  f.source_text = "class A {\n  void go() {}\n}\n";
  return f;
}

ModelEndpoint endpoint() {
  ModelEndpoint e;
  e.model_id = "m";
  e.base_url = "mock://";
  return e;
}

struct Fixture {
  std::shared_ptr<MockChatBackend> mock = std::make_shared<MockChatBackend>();
  Gateway gateway{endpoint(), mock, CacheMode::Live, std::nullopt};
  AssessmentConfig config;
  PromptTemplate tmpl = default_template();
};

}  // namespace

TEST(ExtractDecision, CorpusAgreement) {
  std::istringstream in(test_support::slurp(test_support::fixture("decisions/corpus.jsonl")));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = Json::parse(line);
    auto d = try_extract_decision(j["text"].get<std::string>());
    SCOPED_TRACE(j["name"].get<std::string>());
    if (j["expected"].is_null()) {
      EXPECT_FALSE(d);
    } else {
      ASSERT_TRUE(d);
      EXPECT_EQ(d->score, j["expected"].get<double>());
      EXPECT_EQ(d->clamped, j["clamped"].get<bool>());
    }
    ++n;
  }
  EXPECT_GE(n, 30);
}

TEST(ExtractDecision, ThrowingVariantKeepsRawText) {
  try {
    extract_decision("I am not sure.");
    FAIL();
  } catch (const ParseFailure& e) {
    EXPECT_EQ(e.raw_text(), "I am not sure.");
  }
  EXPECT_EQ(extract_decision("Decision: 12").score, 10.0);
}

TEST(Aggregate, Rules) {
  std::vector<double> s{6, 7, 7, 8, 6};
  EXPECT_DOUBLE_EQ(aggregate_scores(s, AggregationRule::Mean), 6.8);
  EXPECT_EQ(aggregate_scores(s, AggregationRule::Median), 7.0);
  EXPECT_EQ(aggregate_scores(s, AggregationRule::Min), 6.0);
  EXPECT_EQ(aggregate_scores(s, AggregationRule::Max), 8.0);
  std::vector<double> even{1, 4, 2, 3};
  EXPECT_EQ(aggregate_scores(even, AggregationRule::Median), 2.0);
  EXPECT_THROW(aggregate_scores({}, AggregationRule::Mean), std::invalid_argument);
}

TEST(Config, Validate) {
  AssessmentConfig c;
  EXPECT_NO_THROW(c.validate());
  c.sc_runs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.main_temperature = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Single, RecordCarriesScoreAndFingerprint) {
  Fixture fx;
  fx.mock->script("a", {"Explanation: fine\nDecision: 2.5"});
  auto r = assess_finding(finding("a"), fx.gateway, fx.config, fx.tmpl);
  auto* rec = std::get_if<AssessmentRecord>(&r);
  ASSERT_TRUE(rec);
  EXPECT_EQ(rec->score, 2.5);
  EXPECT_EQ(rec->run_index, 0);
  EXPECT_EQ(rec->model_id, "m");
  EXPECT_EQ(rec->prompt_fingerprint, render_prompt(finding("a"), fx.tmpl).fingerprint);
}

namespace {

/// First answer is unusable, the re-ask succeeds.
class ReaskBackend : public ChatBackend {
 public:
  BackendReply send(const ModelEndpoint&, const CompletionRequest& r) override {
    seen.push_back(r.user_message);
    return {200, seen.size() == 1 ? "I cannot decide." : "Decision: 4", ""};
  }
  std::vector<std::string> seen;
};

}  // namespace

TEST(Single, ReasksOnceAfterParseFailure) {
  auto backend = std::make_shared<ReaskBackend>();
  Gateway gw(endpoint(), backend, CacheMode::Live, std::nullopt);
  AssessmentConfig config;
  auto r = assess_finding(finding("a"), gw, config, default_template());
  ASSERT_TRUE(std::holds_alternative<AssessmentRecord>(r));
  EXPECT_EQ(std::get<AssessmentRecord>(r).score, 4.0);
  ASSERT_EQ(backend->seen.size(), 2u);
  EXPECT_TRUE(backend->seen[1].ends_with(kReaskSuffix));
}

TEST(Single, ParseFailureAfterReaskAndWithoutReask) {
  Fixture fx;
  fx.mock->script("a", {"no idea"});
  auto r = assess_finding(finding("a"), fx.gateway, fx.config, fx.tmpl);
  ASSERT_TRUE(std::holds_alternative<AssessmentFailure>(r));
  EXPECT_EQ(std::get<AssessmentFailure>(r).reason, "parse-failure");
  EXPECT_EQ(std::get<AssessmentFailure>(r).raw_response, "no idea");
  EXPECT_EQ(fx.mock->calls(), 2u);

  Fixture fx2;
  fx2.config.reask_on_parse_failure = false;
  fx2.mock->script("a", {"no idea"});
  assess_finding(finding("a"), fx2.gateway, fx2.config, fx2.tmpl);
  EXPECT_EQ(fx2.mock->calls(), 1u);
}

TEST(Single, UnassessableAndOversizedFindings) {
  Fixture fx;
  Finding f = finding("a");
  f.source_text.clear();
  f.unassessable_reason = "missing-source";
  auto r = assess_finding(f, fx.gateway, fx.config, fx.tmpl);
  EXPECT_EQ(std::get<AssessmentFailure>(r).reason, "missing-source");

  fx.config.budget_tokens = 20;
  r = assess_finding(finding("b"), fx.gateway, fx.config, fx.tmpl);
  EXPECT_EQ(std::get<AssessmentFailure>(r).reason, "prompt-too-large");
  EXPECT_EQ(fx.mock->calls(), 0u);
}

TEST(Single, ShotMismatchIsConfigError) {
  Fixture fx;
  fx.config.shots = 2;
  EXPECT_THROW(assess_finding(finding("a"), fx.gateway, fx.config, fx.tmpl), ConfigError);
}

TEST(Single, TransportFailureIsRecorded) {
  auto backend = std::make_shared<ScriptedBackend>(std::deque<BackendReply>{{403, "", "forbidden"}});
  Gateway gw(endpoint(), backend, CacheMode::Live, std::nullopt);
  auto r = assess_finding(finding("a"), gw, AssessmentConfig{}, default_template());
  EXPECT_EQ(std::get<AssessmentFailure>(r).reason, "rejected");
}

TEST(SelfConsistency, FiveRunsAggregateByMean) {
  Fixture fx;
  fx.mock->script("a", {"Decision: 6", "Decision: 7", "Decision: 7", "Decision: 8", "Decision: 6"});
  auto r = assess_self_consistency(finding("a"), fx.gateway, fx.config, fx.tmpl, 3);
  auto& set = std::get<ScoreSet>(r.outcome);
  EXPECT_EQ(set.scores, (std::vector<double>{6, 7, 7, 8, 6}));
  EXPECT_DOUBLE_EQ(set.aggregate, 6.8);
  EXPECT_FALSE(set.partial);
  EXPECT_EQ(set.requested_runs, 5);
  ASSERT_EQ(r.runs.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(std::get<AssessmentRecord>(r.runs[static_cast<std::size_t>(i)]).run_index, i);
    EXPECT_EQ(std::get<AssessmentRecord>(r.runs[static_cast<std::size_t>(i)]).temperature, 0.7);
  }
}

TEST(SelfConsistency, PartialSetWhenMajoritySucceeds) {
  Fixture fx;
  fx.mock->script("a", {"Decision: 6", "junk", "Decision: 8", "junk", "Decision: 7"});
  auto r = assess_self_consistency(finding("a"), fx.gateway, fx.config, fx.tmpl);
  auto& set = std::get<ScoreSet>(r.outcome);
  EXPECT_TRUE(set.partial);
  EXPECT_EQ(set.scores, (std::vector<double>{6, 8, 7}));
  EXPECT_EQ(set.aggregate, 7.0);
}

TEST(SelfConsistency, InsufficientRuns) {
  Fixture fx;
  fx.mock->script("a", {"Decision: 6", "junk", "junk", "junk", "Decision: 7"});
  auto r = assess_self_consistency(finding("a"), fx.gateway, fx.config, fx.tmpl);
  auto& fail = std::get<AssessmentFailure>(r.outcome);
  EXPECT_EQ(fail.reason, "insufficient-runs");
  EXPECT_EQ(fail.run_index, -1);
}

namespace {

/// Answers later findings faster so workers finish out of order.
class SkewedBackend : public ChatBackend {
 public:
  BackendReply send(const ModelEndpoint&, const CompletionRequest& r) override {
    int n = std::stoi(r.finding_id.substr(1));
    std::this_thread::sleep_for(std::chrono::milliseconds(5 * (8 - n)));
    return {200, "Decision: " + std::to_string(n), ""};
  }
};

}  // namespace

TEST(Batch, DeliversInInputOrder) {
  Gateway gw(endpoint(), std::make_shared<SkewedBackend>(), CacheMode::Live, std::nullopt);
  std::vector<Finding> findings;
  for (int i = 0; i < 8; ++i) findings.push_back(finding("f" + std::to_string(i)));
  BatchOptions opts;
  opts.mode = AssessMode::Single;
  opts.workers = 4;
  opts.skip = {"f3"};
  std::vector<std::string> order;
  auto summary = assess_batch(findings, gw, AssessmentConfig{}, default_template(), opts,
                              [&](const std::vector<AssessmentEntry>& entries) {
                                for (const auto& e : entries) order.push_back(std::get<AssessmentRecord>(e).finding_id);
                              });
  EXPECT_EQ(order, (std::vector<std::string>{"f0", "f1", "f2", "f4", "f5", "f6", "f7"}));
  EXPECT_EQ(summary.assessed, 7u);
  EXPECT_EQ(summary.skipped, 1u);
  EXPECT_EQ(summary.failed, 0u);
}

TEST(Batch, SelfConsistencyEmitsRunsThenScoreSet) {
  Fixture fx;
  std::vector<std::vector<AssessmentEntry>> batches;
  BatchOptions opts;
  opts.workers = 2;
  auto summary = assess_batch({finding("a"), finding("b")}, fx.gateway, fx.config, fx.tmpl, opts,
                              [&](const std::vector<AssessmentEntry>& e) { batches.push_back(e); });
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[0].size(), 6u);
  EXPECT_TRUE(std::holds_alternative<ScoreSet>(batches[0].back()));
  EXPECT_EQ(summary.assessed, 2u);
}

TEST(Index, PrefersAggregateAndKeepsFailures) {
  std::vector<AssessmentEntry> entries{
      AssessmentRecord{"a", "m", 1, "second", 4.0, 0.7, ""},
      AssessmentRecord{"a", "m", 0, "first", 2.0, 0.7, ""},
      ScoreSet{"a", "m", {2.0, 4.0}, 3.0, AggregationRule::Mean, 2, false},
      AssessmentRecord{"b", "m", 0, "only", 9.0, 0.0, ""},
      AssessmentFailure{"c", "m", 0, "transport", "down", ""},
      AssessmentRecord{"b", "n", 0, "other model", 1.0, 0.0, ""},
  };
  auto index = index_assessments(entries);
  const auto& a = index.at("m").at("a");
  EXPECT_EQ(a.score, std::optional<double>(3.0));
  EXPECT_TRUE(a.self_consistency);
  EXPECT_EQ(a.explanation, "first");
  EXPECT_EQ(index.at("m").at("b").score, std::optional<double>(9.0));
  EXPECT_FALSE(index.at("m").at("c").score);
  EXPECT_EQ(index.at("m").at("c").failures, std::vector<std::string>{"transport"});
  EXPECT_EQ(index.at("n").at("b").score, std::optional<double>(1.0));
}

TEST(Index, RejectsInconsistentAggregate) {
  std::vector<AssessmentEntry> entries{ScoreSet{"a", "m", {2.0, 4.0}, 3.5, AggregationRule::Mean, 2, false}};
  EXPECT_THROW(index_assessments(entries), ParseError);
}

TEST(Completed, DependsOnMode) {
  std::vector<AssessmentEntry> entries{
      AssessmentRecord{"a", "m", 0, "", 2.0, 0.0, ""},
      ScoreSet{"b", "m", {1.0}, 1.0, AggregationRule::Mean, 1, false},
      AssessmentRecord{"c", "other", 0, "", 2.0, 0.0, ""},
  };
  EXPECT_EQ(completed_findings(entries, "m", AssessMode::Single), (std::set<std::string>{"a"}));
  EXPECT_EQ(completed_findings(entries, "m", AssessMode::SelfConsistency), (std::set<std::string>{"b"}));
}

TEST(Index, FailedScoreSetHasNoScore) {
  std::vector<AssessmentEntry> entries{
      AssessmentRecord{"a", "m", 0, "Decision: 6", 6.0, 0.7, ""},
      AssessmentFailure{"a", "m", 1, "parse-failure", "", "junk"},
      AssessmentFailure{"a", "m", 2, "parse-failure", "", "junk"},
      AssessmentFailure{"a", "m", -1, "insufficient-runs", "1 of 3", ""},
  };
  auto index = index_assessments(entries);
  EXPECT_FALSE(index.at("m").at("a").score);
  EXPECT_EQ(index.at("m").at("a").failures.back(), "insufficient-runs");
}
