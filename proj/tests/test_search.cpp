#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "cfts/builtin.hpp"
#include "cfts/error.hpp"
#include "cfts/search.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace cfts {
namespace {

using test_support::binary_classifier;
using test_support::make_manifest;
using test_support::random_series;
using test_support::rows_series;

MultivariateSeries constant_rows(const std::vector<double>& levels, std::size_t T) {
  std::vector<std::vector<double>> rows;
  for (double l : levels) rows.emplace_back(T, l);
  return rows_series(rows);
}

void expect_valid_and_irreducible(const Classifier& clf, const Dataset& train, const MultivariateSeries& original,
                                  const Explanation& e) {
  const auto& distractor = train.sample(e.distractor_id);
  ASSERT_FALSE(e.substitutions.variables.empty());
  EXPECT_EQ(clf.predict_label(apply_substitution(original, distractor, e.substitutions)), e.target_label);
  for (std::size_t i = 0; i < e.substitutions.variables.size(); ++i) {
    SubstitutionSet fewer = e.substitutions;
    fewer.variables.erase(fewer.variables.begin() + static_cast<std::ptrdiff_t>(i));
    EXPECT_NE(clf.predict_label(apply_substitution(original, distractor, fewer)), e.target_label)
        << "variable " << e.substitutions.variables[i] << " is redundant";
  }
}

TEST(ApplySubstitutionTest, EmptySetReturnsOriginal) {
  const auto a = rows_series({{1, 2}, {3, 4}});
  const auto b = rows_series({{5, 6}, {7, 8}});
  EXPECT_EQ(apply_substitution(a, b, {}), a);
}

TEST(ApplySubstitutionTest, FullSetReturnsDistractor) {
  const auto a = rows_series({{1, 2}, {3, 4}});
  const auto b = rows_series({{5, 6}, {7, 8}});
  EXPECT_EQ(apply_substitution(a, b, {{0, 1}, std::nullopt}), b);
}

TEST(ApplySubstitutionTest, SplicesSingleRow) {
  const auto a = rows_series({{1, 1, 1}, {2, 2, 2}});
  const auto b = rows_series({{9, 9, 9}, {8, 8, 8}});
  EXPECT_EQ(apply_substitution(a, b, {{1}, std::nullopt}), rows_series({{1, 1, 1}, {8, 8, 8}}));
  EXPECT_EQ(a, rows_series({{1, 1, 1}, {2, 2, 2}}));  // not mutated
}

TEST(ApplySubstitutionTest, RespectsWindow) {
  const auto a = rows_series({{1, 1, 1, 1}, {2, 2, 2, 2}});
  const auto b = rows_series({{9, 9, 9, 9}, {8, 8, 8, 8}});
  EXPECT_EQ(apply_substitution(a, b, {{0, 1}, TimeWindow{1, 3}}), rows_series({{1, 9, 9, 1}, {2, 8, 8, 2}}));
}

TEST(ApplySubstitutionTest, RejectsBadInput) {
  const auto a = rows_series({{1, 1, 1}});
  EXPECT_THROW(apply_substitution(a, rows_series({{1, 1}}), {{0}, std::nullopt}), DataError);
  EXPECT_THROW(apply_substitution(a, a, {{1}, std::nullopt}), DataError);
  EXPECT_THROW(apply_substitution(a, a, {{0}, TimeWindow{2, 2}}), DataError);
  EXPECT_THROW(apply_substitution(a, a, {{0}, TimeWindow{1, 4}}), DataError);
}

TEST(SearchConfigTest, RejectsNonPositiveCounts) {
  SearchConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.restarts = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_iters_per_restart = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.k_distractors = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.enable_windows = true;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.initial_subset_size = 0;
  EXPECT_NO_THROW(cfg.validate());
}

// Dataset holding the sample to explain, one positive distractor and negatives.
struct RuleFixture {
  Dataset train;
  Dataset eval;
  Classifier clf;
};

RuleFixture rule_fixture(const IntervalRuleSpec& spec, const std::vector<double>& sample_levels,
                         const std::vector<double>& distractor_levels, unsigned seed = 1) {
  const std::size_t V = spec.variables, T = spec.timesteps;
  RuleFixture f{Dataset(make_manifest(2, V, T)), Dataset(make_manifest(2, V, T)),
                Classifier(make_builtin(spec), PredictionRule::argmax())};
  f.train.add("d", constant_rows(distractor_levels, T), 1);
  std::mt19937_64 rng(seed);
  for (int i = 0; i < 5; ++i) f.train.add("n" + std::to_string(i), random_series(V, T, rng, -1.0, 0.0), 0);
  f.eval.add("x", constant_rows(sample_levels, T), 0);
  return f;
}

TEST(ExplainTest, FindsSinglePlantedVariable) {
  const IntervalRuleSpec spec{5, 8, {{2, 0, 8, 0.5, 8.0}}, 1};
  auto f = rule_fixture(spec, {3, 3, 0, 3, 3}, {-2, -2, 1, -2, -2});
  const auto store = DistractorStore::build(f.train, f.clf);
  const auto& x = f.eval.sample("x");
  EXPECT_EQ(oracle::minimal_flip_sets(f.clf, x, f.train.sample("d"), 1), (std::vector<std::vector<std::size_t>>{{2}}));
  const auto e = explain(f.clf, store, f.eval, "x", 1, SearchConfig{});
  EXPECT_EQ(e.substitutions.variables, (std::vector<std::size_t>{2}));
  EXPECT_FALSE(e.substitutions.window.has_value());
  EXPECT_EQ(e.distractor_id, "d");
  EXPECT_EQ(e.original_label, 0u);
  EXPECT_EQ(e.target_label, 1u);
  EXPECT_LT(e.score_before, 0.5);
  EXPECT_GT(e.score_after, 0.5);
  expect_valid_and_irreducible(f.clf, f.train, x, e);
}

TEST(ExplainTest, FindsConjunctionOfTwoVariables) {
  const IntervalRuleSpec spec{6, 8, {{1, 0, 8, 0.5, 8.0}, {4, 2, 6, 0.5, 8.0}}, 1};
  auto f = rule_fixture(spec, {1, 0, 1, 1, 0, 1}, {0, 1, 0, 0, 1, 0});
  const auto store = DistractorStore::build(f.train, f.clf);
  const auto& x = f.eval.sample("x");
  EXPECT_EQ(oracle::minimal_flip_sets(f.clf, x, f.train.sample("d"), 1),
            (std::vector<std::vector<std::size_t>>{{1, 4}}));
  const auto e = explain(f.clf, store, f.eval, "x", 1, SearchConfig{});
  EXPECT_EQ(e.substitutions.variables, (std::vector<std::size_t>{1, 4}));
  expect_valid_and_irreducible(f.clf, f.train, x, e);
}

TEST(ExplainTest, RejectsSampleAlreadyPredictedAsTarget) {
  const IntervalRuleSpec spec{2, 4, {{0, 0, 4, 0.5, 8.0}}, 1};
  auto f = rule_fixture(spec, {1, 0}, {1, 0});
  const auto store = DistractorStore::build(f.train, f.clf);
  try {
    explain(f.clf, store, f.eval, "x", 1, SearchConfig{});
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_STREQ(e.what(), "sample x is already predicted as c1");
  }
}

TEST(ExplainTest, ReportsMissingDistractors) {
  const IntervalRuleSpec spec{2, 4, {{0, 0, 4, 0.5, 8.0}}, 1};
  auto f = rule_fixture(spec, {0, 0}, {0, 0});  // the lone "positive" is misclassified
  const auto store = DistractorStore::build(f.train, f.clf);
  EXPECT_THROW(explain(f.clf, store, f.eval, "x", 1, SearchConfig{}), NoDistractorsError);
}

TEST(ExplainTest, FallsBackToGreedyWhenClimbingStalls) {
  // Positive only when every variable is high: flat scores stall hill climbing.
  const auto [clf, scorer] = binary_classifier(3, 2, [](const MultivariateSeries& s) {
    for (std::size_t v = 0; v < 3; ++v) {
      if (s.at(v, 0) < 2.5) return 0.1;
    }
    return 0.9;
  });
  Dataset train(make_manifest(2, 3, 2));
  train.add("d", constant_rows({5, 5, 5}, 2), 1);
  const auto store = DistractorStore::build(train, clf);
  const auto x = constant_rows({0, 0, 0}, 2);
  const auto e = explain_sample(clf, store, "x", x, 1, SearchConfig{});
  EXPECT_TRUE(e.search_stats.fallback_used);
  EXPECT_EQ(e.substitutions.variables, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(e.search_stats.restarts_used, 5u);
}

TEST(ExplainTest, CountsEveryScoredSample) {
  std::mt19937_64 rng(3);
  const std::size_t V = 6, T = 4;
  const auto [clf, scorer] = binary_classifier(V, T, [](const MultivariateSeries& s) {
    double m = 0;
    for (std::size_t v = 0; v < 3; ++v) m += s.at(v, 0);
    return m > 0 ? 0.8 : 0.2;
  });
  Dataset train(make_manifest(2, V, T));
  for (int i = 0; i < 40; ++i) {
    auto s = random_series(V, T, rng);
    const ClassIndex label = clf.predict_label(s);
    train.add("t" + std::to_string(i), std::move(s), label);
  }
  const auto store = DistractorStore::build(train, clf);
  for (int i = 0; i < 10; ++i) {
    const auto x = random_series(V, T, rng);
    const ClassIndex target = 1 - clf.predict_label(x);
    const std::size_t before = scorer->queries();
    const auto e = explain_sample(clf, store, "q", x, target, SearchConfig{});
    EXPECT_EQ(e.search_stats.model_queries, scorer->queries() - before);
    EXPECT_EQ(e.search_stats.distractors_tried, 3u);
    EXPECT_EQ(e.search_stats.restarts_used, 15u);
  }
}

TEST(ExplainTest, IsDeterministicAndThreadSafe) {
  std::mt19937_64 rng(17);
  const std::size_t V = 5, T = 6;
  const LinearMeansSpec spec{V, T, {1.5, -0.7, 0.3, 2.0, -1.1}, 0.1};
  const Classifier clf(make_builtin(spec), PredictionRule::argmax());
  Dataset train(make_manifest(2, V, T));
  Dataset eval(make_manifest(2, V, T));
  for (int i = 0; i < 60; ++i) {
    auto s = random_series(V, T, rng);
    train.add("t" + std::to_string(i), s, clf.predict_label(s));
  }
  for (int i = 0; i < 8; ++i) eval.add("e" + std::to_string(i), random_series(V, T, rng), 0);
  const auto store = DistractorStore::build(train, clf);

  std::vector<std::string> first(8), second(8);
  auto run = [&](std::size_t i) {
    const auto id = eval.ids()[i];
    const ClassIndex target = 1 - clf.predict_label(eval.sample(id));
    return explanation_to_json(explain(clf, store, eval, id, target, SearchConfig{}), eval.manifest()).dump();
  };
  for (std::size_t i = 0; i < 8; ++i) first[i] = run(i);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < 8; ++i) threads.emplace_back([&, i] { second[i] = run(i); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(first, second);
}

TEST(ExplainTest, SeedChangesOnlyRestartStarts) {
  const IntervalRuleSpec spec{5, 8, {{2, 0, 8, 0.5, 8.0}}, 1};
  auto f = rule_fixture(spec, {3, 3, 0, 3, 3}, {-2, -2, 1, -2, -2});
  const auto store = DistractorStore::build(f.train, f.clf);
  SearchConfig cfg;
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL, ~0ULL}) {
    cfg.rng_seed = seed;
    EXPECT_EQ(explain(f.clf, store, f.eval, "x", 1, cfg).substitutions.variables, (std::vector<std::size_t>{2}));
  }
}

TEST(ExplainTest, PrefersHigherScoringWindow) {
  // Class-1 score is 0.6 when the late half of v0 is high, plus 0.3 while the
  // early half stays low. Substituting only the late window keeps both terms.
  const auto [clf, scorer] = binary_classifier(2, 8, [](const MultivariateSeries& s) {
    double early = 0, late = 0;
    for (std::size_t t = 0; t < 4; ++t) early += s.at(0, t) / 4;
    for (std::size_t t = 4; t < 8; ++t) late += s.at(0, t) / 4;
    return (late > 0.5 ? 0.6 : 0.0) + (early < -0.5 ? 0.3 : 0.0);
  });
  Dataset train(make_manifest(2, 2, 8));
  train.add("d", rows_series({{0, 0, 0, 0, 1, 1, 1, 1}, {7, 7, 7, 7, 7, 7, 7, 7}}), 1);
  const auto store = DistractorStore::build(train, clf);
  const auto x = rows_series({{-1, -1, -1, -1, 0, 0, 0, 0}, {0, 0, 0, 0, 0, 0, 0, 0}});

  const auto whole = explain_sample(clf, store, "x", x, 1, SearchConfig{});
  EXPECT_EQ(whole.substitutions, (SubstitutionSet{{0}, std::nullopt}));
  EXPECT_DOUBLE_EQ(whole.score_after, 0.6);

  SearchConfig cfg;
  cfg.enable_windows = true;
  cfg.window_width = 4;
  const auto windowed = explain_sample(clf, store, "x", x, 1, cfg);
  EXPECT_EQ(windowed.substitutions, (SubstitutionSet{{0}, TimeWindow{4, 8}}));
  EXPECT_DOUBLE_EQ(windowed.score_after, 0.9);
  EXPECT_EQ(clf.predict_label(apply_substitution(x, train.sample("d"), windowed.substitutions)), 1u);
}

TEST(ExplainTest, DiagnosesStaleStore) {
  // Truthful while the store is built, then always class 0.
  auto calls = std::make_shared<int>(0);
  const auto [clf, scorer] = binary_classifier(1, 2, [calls](const MultivariateSeries& s) {
    return (*calls)++ < 1 && s.at(0, 0) > 0 ? 0.9 : 0.2;
  });
  Dataset train(make_manifest(2, 1, 2));
  train.add("d", constant_rows({1}, 2), 1);
  const auto store = DistractorStore::build(train, clf);
  try {
    explain_sample(clf, store, "x", constant_rows({-1}, 2), 1, SearchConfig{});
    FAIL();
  } catch (const NoCounterfactualError& e) {
    EXPECT_NE(std::string(e.what()).find("distractor store is stale"), std::string::npos) << e.what();
    EXPECT_DOUBLE_EQ(e.best_infeasible_score(), 0.2);
  }
}

TEST(ExplainTest, DiagnosesNonDeterministicClassifier) {
  auto calls = std::make_shared<int>(0);
  const auto [clf, scorer] = binary_classifier(1, 2, [calls](const MultivariateSeries& s) {
    const int n = (*calls)++;
    if (n < 1) return s.at(0, 0) > 0 ? 0.9 : 0.2;
    return 0.2 + 0.01 * (n % 2);  // never positive, but jittery
  });
  Dataset train(make_manifest(2, 1, 2));
  train.add("d", constant_rows({1}, 2), 1);
  const auto store = DistractorStore::build(train, clf);
  try {
    explain_sample(clf, store, "x", constant_rows({-1}, 2), 1, SearchConfig{});
    FAIL();
  } catch (const NoCounterfactualError& e) {
    EXPECT_NE(std::string(e.what()).find("non-deterministic"), std::string::npos) << e.what();
  }
}

TEST(ExplainTest, RandomizedValidityIrreducibilityAndOracleFloor) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t V = 2 + trial % 5, T = 3 + trial % 4;
    std::vector<double> weights(V);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& w : weights) w = n(rng);
    const Classifier clf(make_builtin(LinearMeansSpec{V, T, weights, 0.0}), PredictionRule::argmax());
    Dataset train(make_manifest(2, V, T));
    for (int i = 0; i < 20; ++i) {
      auto s = random_series(V, T, rng);
      train.add("t" + std::to_string(i), s, clf.predict_label(s));
    }
    const auto store = DistractorStore::build(train, clf);
    const auto x = random_series(V, T, rng);
    const ClassIndex target = 1 - clf.predict_label(x);
    if (store.indexed_count(target) == 0) continue;
    const auto e = explain_sample(clf, store, "x", x, target, SearchConfig{});
    expect_valid_and_irreducible(clf, train, x, e);
    const auto floor = oracle::min_flip_size(clf, x, train.sample(e.distractor_id), target);
    ASSERT_TRUE(floor.has_value());
    EXPECT_GE(e.substitutions.variables.size(), *floor);
  }
}

TEST(ExplanationJsonTest, RoundTripsWithNames) {
  const Manifest m = make_manifest(3, 4, 5);
  Explanation e;
  e.sample_id = "s1";
  e.original_label = 2;
  e.target_label = 0;
  e.distractor_id = "d9";
  e.substitutions = {{1, 3}, TimeWindow{0, 2}};
  e.score_before = 0.125;
  e.score_after = 0.75;
  e.search_stats = {5, 123, 3, true};
  const auto j = explanation_to_json(e, m);
  EXPECT_EQ(j.dump(),
            R"({"sample_id":"s1","original_label":"c2","target_label":"c0","distractor_id":"d9",)"
            R"("substitutions":{"variables":["v1","v3"],"window":[0,2]},"score_before":0.125,"score_after":0.75,)"
            R"("search_stats":{"restarts_used":5,"model_queries":123,"distractors_tried":3,"fallback_used":true}})");
  EXPECT_EQ(explanation_from_json(nlohmann::json::parse(j.dump()), m), e);
  e.substitutions.window.reset();
  EXPECT_EQ(explanation_to_json(e, m)["substitutions"]["window"], nullptr);
  EXPECT_EQ(explanation_from_json(nlohmann::json::parse(explanation_to_json(e, m).dump()), m), e);
}

}  // namespace
}  // namespace cfts
