#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfts/classifier.hpp"
#include "cfts/dataset.hpp"
#include "cfts/distractor_store.hpp"

namespace cfts {

/// Half-open timestep range [t0, t1).
struct TimeWindow {
  std::size_t t0 = 0;
  std::size_t t1 = 0;
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

/// Variables whose values are copied from the distractor, optionally restricted
/// to one time window shared by all listed variables.
struct SubstitutionSet {
  std::vector<std::size_t> variables;  // ascending, unique
  std::optional<TimeWindow> window;
  friend bool operator==(const SubstitutionSet&, const SubstitutionSet&) = default;
};

struct SearchStats {
  std::size_t restarts_used = 0;
  std::size_t model_queries = 0;
  std::size_t distractors_tried = 0;
  bool fallback_used = false;
  friend bool operator==(const SearchStats&, const SearchStats&) = default;
};

struct Explanation {
  std::string sample_id;
  ClassIndex original_label = 0;  // the model's prediction for the unmodified sample
  ClassIndex target_label = 0;
  std::string distractor_id;
  SubstitutionSet substitutions;
  double score_before = 0.0;  // target-class score of the original sample
  double score_after = 0.0;   // target-class score of the counterfactual
  SearchStats search_stats;
  friend bool operator==(const Explanation&, const Explanation&) = default;
};

struct SearchConfig {
  std::size_t restarts = 5;
  std::size_t max_iters_per_restart = 100;
  std::size_t k_distractors = 3;
  std::uint64_t rng_seed = 42;
  std::size_t initial_subset_size = 1;
  bool enable_windows = false;
  std::size_t window_width = 0;  // used when enable_windows is set

  /// Throws ConfigError for non-positive counts or a missing window width.
  void validate() const;
};

/// Copy of `original` with the listed variables (inside the window, if any)
/// replaced by the distractor's values.
MultivariateSeries apply_substitution(const MultivariateSeries& original, const MultivariateSeries& distractor,
                                      const SubstitutionSet& subs);

/// Finds the smallest set of variables that, copied from one of the
/// `cfg.k_distractors` nearest target-class distractors, makes the classifier
/// predict `target`.
///
/// Per distractor: random-restart hill climbing over variable subsets, a greedy
/// incremental fallback when no restart reaches the target, then pruning to an
/// irreducible set. The best result over distractors wins (fewer variables, then
/// higher target score, then nearer distractor).
///
/// Throws PreconditionError when the sample is already predicted as `target`,
/// NoDistractorsError when the store holds no target-class samples and
/// NoCounterfactualError when no distractor yields a flip.
Explanation explain(const Classifier& classifier, const DistractorStore& store, const Dataset& dataset,
                    const std::string& sample_id, ClassIndex target, const SearchConfig& cfg);

/// Same as above for a sample that is not part of a dataset.
Explanation explain_sample(const Classifier& classifier, const DistractorStore& store, const std::string& sample_id,
                           const MultivariateSeries& sample, ClassIndex target, const SearchConfig& cfg);

/// Explanation JSON with class and variable names taken from the manifest.
nlohmann::ordered_json explanation_to_json(const Explanation& e, const Manifest& manifest);
Explanation explanation_from_json(const nlohmann::json& j, const Manifest& manifest);

}  // namespace cfts
