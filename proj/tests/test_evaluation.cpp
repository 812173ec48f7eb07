#include <gtest/gtest.h>

#include "cfts/builtin.hpp"
#include "cfts/error.hpp"
#include "cfts/evaluation.hpp"
#include "support/coverage_fixture.hpp"
#include "support/fixtures.hpp"

namespace cfts {
namespace {

using test_support::make_coverage_fixture;

TEST(CountStatisticsTest, MeanModeAndHistogram) {
  const std::vector<std::size_t> counts{2, 2, 4};
  const auto s = count_statistics(counts);
  ASSERT_TRUE(s.mean.has_value());
  EXPECT_NEAR(*s.mean, 8.0 / 3.0, 1e-12);
  EXPECT_EQ(s.mode, 2u);
  EXPECT_EQ(s.histogram, (std::map<std::size_t, std::size_t>{{2, 2}, {4, 1}}));
}

TEST(CountStatisticsTest, SingletonAndEmpty) {
  const std::vector<std::size_t> one{3};
  const auto s = count_statistics(one);
  EXPECT_EQ(s.mean, 3.0);
  EXPECT_EQ(s.mode, 3u);
  const auto e = count_statistics(std::vector<std::size_t>{});
  EXPECT_FALSE(e.mean.has_value());
  EXPECT_FALSE(e.mode.has_value());
  EXPECT_TRUE(e.histogram.empty());
}

TEST(CountStatisticsTest, ModeTieTakesSmallestCount) {
  const std::vector<std::size_t> counts{5, 1, 5, 1, 3};
  EXPECT_EQ(count_statistics(counts).mode, 1u);
}

TEST(CoverageGroupTest, PercentRoundsHalfUp) {
  CoverageGroup g;
  g.explanation = Explanation{};
  auto pct = [&](std::size_t hits, std::size_t n) {
    g.hits = hits;
    g.n = n;
    return *g.coverage_percent();
  };
  EXPECT_EQ(pct(28, 49), 57u);
  EXPECT_EQ(pct(1, 8), 13u);
  EXPECT_EQ(pct(3, 8), 38u);
  EXPECT_EQ(pct(2, 3), 67u);
  EXPECT_EQ(pct(1, 200), 1u);
  EXPECT_EQ(pct(1, 201), 0u);
  EXPECT_EQ(pct(7, 7), 100u);
  g.explanation.reset();
  g.failure = "none";
  EXPECT_FALSE(g.coverage_percent().has_value());
  EXPECT_FALSE(g.coverage().has_value());
}

TEST(CoverageTest, ReplaysSeedSubstitutionAcrossGroup) {
  const auto f = make_coverage_fixture(49, 28);
  const Classifier clf(make_builtin(f.model), PredictionRule::argmax());
  const auto store = DistractorStore::build(f.train, clf);
  const auto report = eval_coverage(clf, store, f.eval, f.eval_ids, SearchConfig{});
  ASSERT_EQ(report.groups.size(), 1u);
  const auto& g = report.groups[0];
  EXPECT_EQ(g.true_label, 1u);
  EXPECT_EQ(g.predicted_label, 0u);
  EXPECT_EQ(g.seed_sample_id, "m1000");
  ASSERT_TRUE(g.explanation.has_value());
  EXPECT_EQ(g.explanation->substitutions.variables, (std::vector<std::size_t>{0}));
  EXPECT_EQ(g.n, 49u);
  EXPECT_EQ(g.hits, 28u);
  EXPECT_EQ(g.coverage_percent(), 57u);

  const auto j = to_json(report, f.eval.manifest());
  EXPECT_EQ(j["groups"][0]["coverage_rational"], nlohmann::ordered_json({28, 49}));
  EXPECT_EQ(j["groups"][0]["N"], 49);
  EXPECT_EQ(coverage_table(report, f.eval.manifest()),
            "Misclassification Type (True, Predicted)  Coverage (%)   N\n"
            "----------------------------------------------------------\n"
            "c1, c0                                              57  49\n");
}

TEST(CoverageTest, FullAndSingletonGroups) {
  const auto full = make_coverage_fixture(10, 10);
  const Classifier clf(make_builtin(full.model), PredictionRule::argmax());
  const auto store = DistractorStore::build(full.train, clf);
  const auto r = eval_coverage(clf, store, full.eval, full.eval_ids, SearchConfig{});
  ASSERT_EQ(r.groups.size(), 1u);
  EXPECT_EQ(r.groups[0].coverage(), 1.0);

  const auto one = make_coverage_fixture(1, 1);
  const auto r1 = eval_coverage(clf, store, one.eval, one.eval_ids, SearchConfig{});
  ASSERT_EQ(r1.groups.size(), 1u);
  EXPECT_EQ(r1.groups[0].n, 1u);
  EXPECT_EQ(r1.groups[0].hits, 1u);

  const auto r2 = eval_coverage(clf, store, full.eval, full.eval_ids, SearchConfig{}, 11);
  EXPECT_TRUE(r2.groups.empty());
  EXPECT_EQ(r2.skipped, (std::vector<std::pair<ClassIndex, ClassIndex>>{{1, 0}}));
}

TEST(CoverageTest, CorrectlyClassifiedSamplesFormNoGroup) {
  auto f = make_coverage_fixture(3, 3);
  const Classifier clf(make_builtin(f.model), PredictionRule::argmax());
  const auto store = DistractorStore::build(f.train, clf);
  f.eval.add("ok", MultivariateSeries::from_rows({"v0", "v1", "v2"}, {{1, 1, 1, 1}, {1, 1, 1, 1}, {0, 0, 0, 0}}), 1);
  f.eval_ids.push_back("ok");
  const auto r = eval_coverage(clf, store, f.eval, f.eval_ids, SearchConfig{});
  ASSERT_EQ(r.groups.size(), 1u);
  EXPECT_EQ(r.groups[0].n, 3u);
}

TEST(CoverageTest, RecordsSeedFailure) {
  const auto f = make_coverage_fixture(4, 2);
  const Classifier clf(make_builtin(f.model), PredictionRule::argmax());
  Dataset only_negative(f.train.manifest());
  only_negative.add("train_fail", f.train.sample("train_fail"), 0);
  const auto store = DistractorStore::build(only_negative, clf);
  const auto r = eval_coverage(clf, store, f.eval, f.eval_ids, SearchConfig{});
  ASSERT_EQ(r.groups.size(), 1u);
  EXPECT_TRUE(r.groups[0].failure.has_value());
  EXPECT_EQ(r.groups[0].hits, 0u);
  EXPECT_NE(coverage_table(r, f.eval.manifest()).find("n/a"), std::string::npos);
}

TEST(LeakageTest, RejectsTrainingIdsInEvalSet) {
  auto f = make_coverage_fixture(2, 1);
  const Classifier clf(make_builtin(f.model), PredictionRule::argmax());
  const auto store = DistractorStore::build(f.train, clf);
  f.eval.add("train_fail", f.train.sample("train_fail"), 0);
  try {
    eval_coverage(clf, store, f.eval, {"m1000", "train_fail"}, SearchConfig{});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "data leakage: eval sample train_fail is also a training sample of the distractor store");
  }
  EXPECT_THROW(eval_comprehensibility(clf, store, f.eval, {"train_fail"}, 1, SearchConfig{}), DataError);
  EXPECT_THROW(eval_coverage(clf, store, f.eval, {"nope"}, SearchConfig{}), DataError);
  EXPECT_THROW(eval_coverage(clf, store, f.eval, {"m1000", "m1000"}, SearchConfig{}), DataError);
}

TEST(ComprehensibilityTest, CountsSubstitutionsPerSample) {
  const auto f = make_coverage_fixture(6, 4);
  const Classifier clf(make_builtin(f.model), PredictionRule::argmax());
  const auto store = DistractorStore::build(f.train, clf);
  const auto r = eval_comprehensibility(clf, store, f.eval, f.eval_ids, 1, SearchConfig{});
  ASSERT_EQ(r.per_sample.size(), 6u);
  EXPECT_EQ(r.per_sample[0], (std::pair<std::string, std::size_t>{"m1000", 1}));
  EXPECT_EQ(r.per_sample[5].second, 2u);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_NEAR(*r.stats.mean, 8.0 / 6.0, 1e-12);
  EXPECT_EQ(r.stats.mode, 1u);
  EXPECT_EQ(comprehensibility_summary(r),
            "explained samples: 6\nfailures: 0\nmean substitutions: 1.333\nmode substitutions: 1\nhistogram: 1:4 2:2\n");
}

TEST(ComprehensibilityTest, RejectsSamplesAlreadyAtTarget) {
  const auto f = make_coverage_fixture(3, 1);
  const Classifier clf(make_builtin(f.model), PredictionRule::argmax());
  const auto store = DistractorStore::build(f.train, clf);
  EXPECT_THROW(eval_comprehensibility(clf, store, f.eval, f.eval_ids, 0, SearchConfig{}), PreconditionError);
}

TEST(ComprehensibilityTest, CollectsFailures) {
  const auto f = make_coverage_fixture(3, 1);
  const Classifier clf(make_builtin(f.model), PredictionRule::argmax());
  Dataset only_negative(f.train.manifest());
  only_negative.add("train_fail", f.train.sample("train_fail"), 0);
  const auto store = DistractorStore::build(only_negative, clf);
  const auto r = eval_comprehensibility(clf, store, f.eval, f.eval_ids, 1, SearchConfig{});
  EXPECT_TRUE(r.per_sample.empty());
  EXPECT_EQ(r.failures, f.eval_ids);
  EXPECT_FALSE(r.stats.mean.has_value());
}

}  // namespace
}  // namespace cfts
