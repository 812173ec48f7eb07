#pragma once

// Independent reference implementations used only by tests. Nothing here calls
// into the search or KD-tree code it checks.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfts/classifier.hpp"
#include "cfts/dataset.hpp"

namespace cfts::oracle {

/// Exhaustive k-NN over (id, flattened vector) pairs; ties by id.
inline std::vector<std::pair<std::string, double>> linear_scan_knn(
    const std::vector<std::pair<std::string, std::vector<double>>>& points, const std::vector<double>& query,
    std::size_t k) {
  std::vector<std::pair<double, std::string>> all;
  for (const auto& [id, p] : points) {
    double ss = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double diff = p[i] - query[i];
      ss += diff * diff;
    }
    all.emplace_back(ss, id);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.emplace_back(all[i].second, all[i].first);
  return out;
}

/// Builds the counterfactual by hand: rows in `mask` come from the distractor.
inline MultivariateSeries splice_rows(const MultivariateSeries& original, const MultivariateSeries& distractor,
                                      unsigned long long mask) {
  std::vector<std::vector<double>> rows;
  for (std::size_t v = 0; v < original.variable_count(); ++v) {
    const auto src = (mask >> v) & 1ULL ? distractor.row(v) : original.row(v);
    rows.emplace_back(src.begin(), src.end());
  }
  return MultivariateSeries::from_rows(original.variables(), rows);
}

/// Smallest number of whole-variable substitutions from `distractor` that makes
/// the classifier predict `target`, over all 2^V subsets. nullopt if none.
inline std::optional<std::size_t> min_flip_size(const Classifier& clf, const MultivariateSeries& original,
                                                const MultivariateSeries& distractor, ClassIndex target) {
  const std::size_t V = original.variable_count();
  std::vector<MultivariateSeries> batch;
  std::vector<std::size_t> sizes;
  for (unsigned long long mask = 0; mask < (1ULL << V); ++mask) {
    batch.push_back(splice_rows(original, distractor, mask));
    sizes.push_back(static_cast<std::size_t>(__builtin_popcountll(mask)));
  }
  const auto scores = clf.predict_scores(batch);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (clf.label_of(scores[i]) == target && (!best || sizes[i] < *best)) best = sizes[i];
  }
  return best;
}

/// All minimum-size flipping subsets (as sorted index lists).
inline std::vector<std::vector<std::size_t>> minimal_flip_sets(const Classifier& clf,
                                                                const MultivariateSeries& original,
                                                                const MultivariateSeries& distractor,
                                                                ClassIndex target) {
  const auto best = min_flip_size(clf, original, distractor, target);
  std::vector<std::vector<std::size_t>> out;
  if (!best) return out;
  const std::size_t V = original.variable_count();
  for (unsigned long long mask = 0; mask < (1ULL << V); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) != *best) continue;
    if (clf.predict_label(splice_rows(original, distractor, mask)) != target) continue;
    std::vector<std::size_t> set;
    for (std::size_t v = 0; v < V; ++v) {
      if ((mask >> v) & 1ULL) set.push_back(v);
    }
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace cfts::oracle
