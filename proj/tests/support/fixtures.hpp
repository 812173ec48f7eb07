#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cfts/classifier.hpp"
#include "cfts/dataset.hpp"

namespace cfts::test_support {

inline std::vector<std::string> var_names(std::size_t V) {
  std::vector<std::string> names;
  for (std::size_t v = 0; v < V; ++v) names.push_back("v" + std::to_string(v));
  return names;
}

inline Manifest make_manifest(std::size_t C, std::size_t V, std::size_t T) {
  Manifest m;
  for (std::size_t c = 0; c < C; ++c) m.class_names.push_back("c" + std::to_string(c));
  m.variable_names = var_names(V);
  m.timesteps = T;
  return m;
}

inline MultivariateSeries rows_series(const std::vector<std::vector<double>>& rows) {
  return MultivariateSeries::from_rows(var_names(rows.size()), rows);
}

inline MultivariateSeries random_series(std::size_t V, std::size_t T, std::mt19937_64& rng, double lo = -1.0,
                                        double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> values(V * T);
  for (auto& x : values) x = d(rng);
  return MultivariateSeries(var_names(V), T, values);
}

/// Scorer computing scores with an arbitrary function of one sample.
class FunctionScorer final : public Scorer {
 public:
  using Fn = std::function<ScoreVector(const MultivariateSeries&)>;
  FunctionScorer(std::size_t C, std::size_t V, std::size_t T, Fn fn) : C_(C), V_(V), T_(T), fn_(std::move(fn)) {}
  std::size_t class_count() const override { return C_; }
  std::size_t variable_count() const override { return V_; }
  std::size_t timesteps() const override { return T_; }
  std::vector<ScoreVector> score(std::span<const MultivariateSeries> batch) const override {
    std::vector<ScoreVector> out;
    for (const auto& s : batch) {
      ++queries_;
      out.push_back(fn_(s));
    }
    return out;
  }
  std::size_t queries() const { return queries_; }

 private:
  std::size_t C_, V_, T_;
  Fn fn_;
  mutable std::atomic<std::size_t> queries_{0};
};

/// Binary classifier whose class-1 score is `p1(sample)`.
inline std::pair<Classifier, std::shared_ptr<FunctionScorer>> binary_classifier(
    std::size_t V, std::size_t T, std::function<double(const MultivariateSeries&)> p1) {
  auto scorer = std::make_shared<FunctionScorer>(2, V, T, [p1](const MultivariateSeries& s) {
    const double p = p1(s);
    return ScoreVector{1.0 - p, p};
  });
  return {Classifier(scorer, PredictionRule::argmax()), scorer};
}

}  // namespace cfts::test_support
