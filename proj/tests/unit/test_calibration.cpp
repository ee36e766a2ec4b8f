#include <gtest/gtest.h>

#include <sstream>

#include "sast_triage/calibration.hpp"
#include "sast_triage/errors.hpp"

using namespace sast_triage;

namespace {

// a, b real in X; c not real in X; d not real in Y; e real in Y; f not real in Y.
std::vector<LabeledItem> six_items() {
  return {{"a", "X", true}, {"b", "X", true}, {"c", "X", false},
          {"d", "Y", false}, {"e", "Y", true}, {"f", "Y", false}};
}

ScoreMap six_scores() { return {{"a", 8.0}, {"b", 3.5}, {"c", 2.0}, {"d", 6.0}, {"e", 9.5}, {"f", 0.5}}; }

ConfusionCounts counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  ConfusionCounts c;
  c.tp = tp;
  c.fp = fp;
  c.tn = tn;
  c.fn = fn;
  return c;
}

std::vector<LabeledItem> owasp_like_items() {
  std::vector<LabeledItem> items;
  for (int i = 0; i < 403; ++i) items.push_back({"t" + std::to_string(i), "CWE-89", i >= 128});
  return items;
}

}  // namespace

TEST(ConfusionAt, AllScoredAboveThresholdIsAllVulnerable) {
  auto items = owasp_like_items();
  ScoreMap scores;
  for (const auto& i : items) scores[i.finding_id] = 9.0;
  EXPECT_EQ(confusion_at(items, scores, 6.0), counts(275, 128, 0, 0));
}

TEST(ConfusionAt, AllScoredBelowThresholdIsTheComplement) {
  auto items = owasp_like_items();
  ScoreMap scores;
  for (const auto& i : items) scores[i.finding_id] = 1.0;
  EXPECT_EQ(confusion_at(items, scores, 6.0), counts(0, 0, 128, 275));
}

TEST(ConfusionAt, SingleRealBelowThresholdIsOneFn) {
  EXPECT_EQ(confusion_at({{"x", "C", true}}, {{"x", 2.0}}, 5.0), counts(0, 0, 0, 1));
}

TEST(ConfusionAt, CategoryFilterAndErrors) {
  auto c = confusion_at(six_items(), six_scores(), 4.0, std::string("X"));
  EXPECT_EQ(c.tp, 1u);
  EXPECT_EQ(c.fn, 1u);
  EXPECT_EQ(c.tn, 1u);
  EXPECT_EQ(c.category, std::optional<std::string>("X"));
  EXPECT_THROW(confusion_at(six_items(), six_scores(), 4.0, std::string("Z")), CalibrationError);
  EXPECT_THROW(confusion_at({}, {}, 4.0), CalibrationError);
  EXPECT_THROW(confusion_at({{"q", "X", true}}, {}, 4.0), CalibrationError);
}

TEST(MetricsFrom, FullRecallWhenNoFn) {
  EXPECT_EQ(metrics_from(counts(275, 48, 80, 0)).tpr, 1.0);
}

TEST(MetricsFrom, IdentityWhenPrecisionEqualsRecall) {
  for (std::size_t k = 1; k <= 50; ++k) {
    // tp = k, fp = fn = 50 - k + 1 gives P = R exactly.
    auto m = metrics_from(counts(k, 51 - k, 7, 51 - k));
    ASSERT_EQ(m.precision, m.tpr);
    EXPECT_EQ(m.f_beta, m.precision) << k;
  }
}

TEST(MetricsFrom, HalfPrecisionFullRecall) {
  auto m = metrics_from(counts(1, 1, 0, 0));
  EXPECT_DOUBLE_EQ(m.f_beta, 2.5 / 3.0);
  EXPECT_NEAR(m.f_beta, 0.8333, 1e-4);
}

TEST(MetricsFrom, ZeroDenominatorSentinels) {
  auto m = metrics_from(counts(0, 0, 5, 0));  // nothing flagged vulnerable, nothing real
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.tpr, 1.0);
  EXPECT_EQ(m.fpr, 0.0);
  EXPECT_EQ(m.tn_ratio, 1.0);
  auto n = metrics_from(counts(3, 0, 0, 0));  // no non-real findings
  EXPECT_EQ(n.fpr, 0.0);
  EXPECT_EQ(n.tn_ratio, 0.0);
  auto z = metrics_from(counts(0, 4, 0, 2));  // P = R = 0
  EXPECT_EQ(z.f_beta, 0.0);
}

TEST(MetricsFrom, RejectsNonPositiveBeta) {
  EXPECT_THROW(metrics_from(counts(1, 1, 1, 1), 0.0), std::invalid_argument);
  EXPECT_THROW(metrics_from(counts(1, 1, 1, 1), -2.0), std::invalid_argument);
}

TEST(MetricsFrom, TnRatioAtEightyOfOneHundredTwentyEight) {
  EXPECT_EQ(metrics_from(counts(275, 48, 80, 0)).tn_ratio, 0.625);
}

TEST(MacroAverage, TwoCategories) {
  Metrics a{1.0, 0.0, 1.0, 1.0, 1.0};
  Metrics b{0.5, 0.5, 0.5, 0.5, 0.5};
  EXPECT_EQ(macro_average({a, b}).tpr, 0.75);
}

TEST(MacroAverage, SingleCategoryIsIdentity) {
  Metrics a{0.3, 0.2, 0.7, 0.4, 0.8};
  EXPECT_EQ(macro_average({a}), a);
  EXPECT_THROW(macro_average({}), std::invalid_argument);
}

TEST(MacroAverage, ElevenCategories) {
  std::vector<Metrics> v;
  double sum = 0;
  for (int i = 0; i < 11; ++i) {
    v.push_back(Metrics{i / 10.0, 0, 0, 0, 0});
    sum += i / 10.0;
  }
  EXPECT_DOUBLE_EQ(macro_average(v).tpr, sum / 11);
}

TEST(Grid, DefaultAndParse) {
  EXPECT_EQ(ThresholdGrid::default_grid().values, (std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9}));
  EXPECT_EQ(ThresholdGrid::parse("1:9:1"), ThresholdGrid::default_grid());
  EXPECT_EQ(ThresholdGrid::parse("2, 4.5,7").values, (std::vector<double>{2, 4.5, 7}));
  EXPECT_EQ(ThresholdGrid::parse("0.5:1.5:0.5").values, (std::vector<double>{0.5, 1, 1.5}));
  EXPECT_EQ(ThresholdGrid::parse("1:2:0.1").values.size(), 11u);
  EXPECT_EQ(ThresholdGrid::parse("1:2:0.1").values[3], 1.3);
  EXPECT_THROW(ThresholdGrid::parse("3,2"), ConfigError);
  EXPECT_THROW(ThresholdGrid::parse("1,1"), ConfigError);
  EXPECT_THROW(ThresholdGrid::parse("1,11"), ConfigError);
  EXPECT_THROW(ThresholdGrid::parse(""), ConfigError);
  EXPECT_THROW(ThresholdGrid::parse("a,b"), ConfigError);
  EXPECT_THROW(ThresholdGrid::parse("1:9:0"), ConfigError);
}

TEST(Sweep, SixFindingHandTable) {
  auto r = calibrate("m", six_items(), six_scores(), ThresholdGrid{{2, 4, 7}});
  ASSERT_EQ(r.rows_overall.size(), 3u);
  EXPECT_EQ(r.rows_overall[0].counts, counts(3, 2, 1, 0));
  EXPECT_EQ(r.rows_overall[1].counts, counts(2, 1, 2, 1));
  EXPECT_EQ(r.rows_overall[2].counts, counts(2, 0, 3, 1));
  EXPECT_DOUBLE_EQ(r.rows_overall[0].metrics.f_beta, 3.0 / 3.4);
  EXPECT_DOUBLE_EQ(r.rows_overall[2].metrics.f_beta, 10.0 / 14.0);

  const auto& x = r.rows_by_category.at("X");
  EXPECT_EQ(x[0].counts.fp, 1u);
  EXPECT_EQ(x[1].counts.fn, 1u);
  EXPECT_EQ(r.macro_rows[1].metrics.tpr, 0.75);
  EXPECT_EQ(r.macro_rows[1].metrics.fpr, 0.25);
  EXPECT_EQ(r.macro_rows[1].metrics.precision, 0.75);
  EXPECT_DOUBLE_EQ(r.macro_rows[1].metrics.f_beta, 25.0 / 36.0);

  EXPECT_EQ(r.conservative_threshold, 2.0);
  EXPECT_EQ(r.tn_set, (std::set<std::string>{"f"}));
}

TEST(Sweep, SingleValueGridGivesOneRow) {
  auto r = calibrate("m", six_items(), six_scores(), ThresholdGrid{{5}});
  EXPECT_EQ(r.rows_overall.size(), 1u);
  EXPECT_EQ(r.macro_rows.size(), 1u);
}

TEST(Sweep, CountsExclusions) {
  auto scores = six_scores();
  scores.erase("a");
  scores["zz"] = 3.0;
  auto r = calibrate("m", six_items(), scores, ThresholdGrid::default_grid());
  EXPECT_EQ(r.excluded_unscored, 1u);
  EXPECT_EQ(r.excluded_unlabeled, 1u);
  EXPECT_EQ(r.evaluated.size(), 5u);
  EXPECT_THROW(calibrate("m", six_items(), {}, ThresholdGrid::default_grid()), CalibrationError);
}

TEST(Sweep, CsvIsByteStable) {
  auto r = calibrate("m", six_items(), six_scores(), ThresholdGrid{{2, 4, 7}});
  std::ostringstream csv;
  write_calibration_csv(csv, r);
  const std::string expected =
      "model,scope,category,threshold,tp,fp,tn,fn,tpr,fpr,precision,f_beta,tn_ratio\n"
      "m,overall,,2,3,2,1,0,1.000000,0.666667,0.600000,0.882353,0.333333\n"
      "m,overall,,4,2,1,2,1,0.666667,0.333333,0.666667,0.666667,0.666667\n"
      "m,overall,,7,2,0,3,1,0.666667,0.000000,1.000000,0.714286,1.000000\n"
      "m,macro,,2,3,2,1,0,1.000000,0.750000,0.583333,0.871212,0.250000\n"
      "m,macro,,4,2,1,2,1,0.750000,0.250000,0.750000,0.694444,0.750000\n"
      "m,macro,,7,2,0,3,1,0.750000,0.000000,1.000000,0.777778,1.000000\n"
      "m,category,X,2,2,1,0,0,1.000000,1.000000,0.666667,0.909091,0.000000\n"
      "m,category,X,4,1,0,1,1,0.500000,0.000000,1.000000,0.555556,1.000000\n"
      "m,category,X,7,1,0,1,1,0.500000,0.000000,1.000000,0.555556,1.000000\n"
      "m,category,Y,2,1,1,1,0,1.000000,0.500000,0.500000,0.833333,0.500000\n"
      "m,category,Y,4,1,1,1,0,1.000000,0.500000,0.500000,0.833333,0.500000\n"
      "m,category,Y,7,1,0,2,0,1.000000,0.000000,1.000000,1.000000,1.000000\n";
  EXPECT_EQ(csv.str(), expected);
}

TEST(Conservative, PicksLargestZeroFnThreshold) {
  std::vector<MetricRow> rows;
  std::vector<std::size_t> fn{0, 0, 0, 0, 0, 0, 2, 5, 9};
  for (std::size_t i = 0; i < fn.size(); ++i) rows.push_back(MetricRow{double(i + 1), counts(10, 1, 1, fn[i]), {}});
  EXPECT_EQ(conservative_threshold(rows), 6.0);
}

TEST(Conservative, AbsentWhenFirstThresholdAlreadyMisses) {
  std::vector<MetricRow> rows{{1, counts(1, 1, 1, 1), {}}, {2, counts(1, 1, 1, 2), {}}};
  EXPECT_EQ(conservative_threshold(rows), std::nullopt);
}

TEST(Conservative, GridMaxWhenNeverMissing) {
  std::vector<MetricRow> rows;
  for (int t = 1; t <= 9; ++t) rows.push_back({double(t), counts(1, 1, 1, 0), {}});
  EXPECT_EQ(conservative_threshold(rows), 9.0);
}

namespace {

std::vector<LabeledItem> five_items() {
  return {{"a", "C", false}, {"b", "C", false}, {"c", "C", false}, {"d", "C", false}, {"e", "C", true}};
}

}  // namespace

TEST(Ensemble, UnionOfTnSets) {
  auto grid = ThresholdGrid::default_grid();
  auto m1 = calibrate("m1", five_items(), {{"a", 1}, {"b", 1}, {"c", 5}, {"d", 5}, {"e", 5.5}}, grid);
  auto m2 = calibrate("m2", five_items(), {{"a", 5}, {"b", 1}, {"c", 1}, {"d", 5}, {"e", 5.5}}, grid);
  ASSERT_EQ(m1.tn_set, (std::set<std::string>{"a", "b"}));
  ASSERT_EQ(m2.tn_set, (std::set<std::string>{"b", "c"}));
  auto e = ensemble_union({m1, m2});
  EXPECT_EQ(e.union_tn_set, (std::set<std::string>{"a", "b", "c"}));
  EXPECT_EQ(e.combined_counts, counts(1, 1, 3, 0));
  EXPECT_EQ(e.combined_metrics.tn_ratio, 0.75);
}

TEST(Ensemble, SingleMemberEqualsMember) {
  auto m = calibrate("m", six_items(), six_scores(), ThresholdGrid::default_grid());
  auto e = ensemble_union({m});
  EXPECT_EQ(e.union_tn_set, m.tn_set);
  const auto& row = m.rows_overall[static_cast<std::size_t>(*m.conservative_threshold) - 1];
  EXPECT_EQ(e.combined_counts, row.counts);
  EXPECT_EQ(e.combined_metrics, row.metrics);
}

TEST(Ensemble, RejectsNonConservativeMemberByName) {
  auto good = calibrate("good", five_items(), {{"a", 1}, {"b", 1}, {"c", 5}, {"d", 5}, {"e", 5.5}},
                        ThresholdGrid::default_grid());
  auto bad = calibrate("leaky", five_items(), {{"a", 1}, {"b", 1}, {"c", 5}, {"d", 5}, {"e", 0.5}},
                       ThresholdGrid::default_grid());
  ASSERT_FALSE(bad.conservative_threshold);
  try {
    ensemble_union({good, bad});
    FAIL();
  } catch (const CalibrationError& e) {
    EXPECT_NE(std::string(e.what()).find("leaky"), std::string::npos);
  }
  EXPECT_THROW(ensemble_union({}), CalibrationError);
}

TEST(Ensemble, RejectsMixedLabelSets) {
  auto m1 = calibrate("m1", five_items(), {{"a", 1}, {"b", 1}, {"c", 5}, {"d", 5}, {"e", 5.5}},
                      ThresholdGrid::default_grid());
  auto items = five_items();
  items.pop_back();
  items.push_back({"x", "C", true});
  auto m2 = calibrate("m2", items, {{"a", 1}, {"b", 1}, {"c", 5}, {"d", 5}, {"x", 5.5}}, ThresholdGrid::default_grid());
  EXPECT_THROW(ensemble_union({m1, m2}), CalibrationError);
}

TEST(CalibrationJson, RoundTrip) {
  auto r = calibrate("m", six_items(), six_scores(), ThresholdGrid{{2, 4, 7}});
  auto back = calibration_from_json(Json::parse(to_json(r).dump()));
  EXPECT_EQ(back, r);
}

TEST(CalibrationJson, RejectsTamperedThreshold) {
  auto j = to_json(calibrate("m", six_items(), six_scores(), ThresholdGrid{{2, 4, 7}}));
  j["conservative_threshold"] = 7;
  EXPECT_THROW(calibration_from_json(j), ParseError);
  j["kind"] = "other";
  EXPECT_THROW(calibration_from_json(j), ParseError);
}

TEST(LabeledSetFrom, KeepsReportOrderAndCountsDropped) {
  SecurityReport report;
  for (std::string id : {"b", "a"}) {
    Finding f;
    f.id = id;
    f.category = "c";
    f.cwe_id = 79;
    report.findings.push_back(f);
  }
  auto set = LabeledSet::from(report, {{"a", true}, {"b", false}, {"zzz", true}});
  ASSERT_EQ(set.items.size(), 2u);
  EXPECT_EQ(set.items[0].finding_id, "b");
  EXPECT_EQ(set.items[0].category, "CWE-79");
  EXPECT_EQ(set.dropped_labels, 1u);
}

TEST(LabelsFingerprint, OrderIndependentLabelSensitive) {
  std::vector<LabeledItem> a{{"x", "C", true}, {"y", "C", false}};
  std::vector<LabeledItem> b{{"y", "C", false}, {"x", "C", true}};
  EXPECT_EQ(labels_fingerprint(a), labels_fingerprint(b));
  b[1].is_real = false;
  EXPECT_NE(labels_fingerprint(a), labels_fingerprint(b));
}

TEST(FormatThreshold, ShortestForm) {
  EXPECT_EQ(format_threshold(6.0), "6");
  EXPECT_EQ(format_threshold(0.5), "0.5");
  EXPECT_EQ(format_threshold(2.25), "2.25");
}
