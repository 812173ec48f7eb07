#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cfts/search.hpp"

namespace cfts {

struct CountStatistics {
  std::optional<double> mean;       // unset when there are no counts
  std::optional<std::size_t> mode;  // most frequent count, smallest on ties
  std::map<std::size_t, std::size_t> histogram;
};

CountStatistics count_statistics(std::span<const std::size_t> counts);

struct ComprehensibilityReport {
  std::vector<std::pair<std::string, std::size_t>> per_sample;  // eval order
  CountStatistics stats;
  std::vector<std::string> failures;  // no counterfactual (or no distractor) for these samples
};

/// Explains every eval sample towards `target` and summarizes substitution counts.
/// Eval ids must be disjoint from the store's training ids and none may already
/// be predicted as `target`.
ComprehensibilityReport eval_comprehensibility(const Classifier& classifier, const DistractorStore& store,
                                               const Dataset& dataset, const std::vector<std::string>& eval_ids,
                                               ClassIndex target, const SearchConfig& cfg);

struct CoverageGroup {
  ClassIndex true_label = 0;
  ClassIndex predicted_label = 0;
  std::size_t n = 0;
  std::size_t hits = 0;
  std::string seed_sample_id;
  std::optional<Explanation> explanation;
  std::optional<std::string> failure;  // set when the seed has no counterfactual

  /// hits / n, unset for failed groups.
  std::optional<double> coverage() const;
  /// Coverage in whole percent, rounded half up with integer arithmetic.
  std::optional<std::size_t> coverage_percent() const;
};

struct CoverageReport {
  std::vector<CoverageGroup> groups;  // sorted by (true_label, predicted_label)
  std::vector<std::pair<ClassIndex, ClassIndex>> skipped;  // groups smaller than min_group_size
};

/// Groups misclassified eval samples by (true, predicted) label, explains the
/// first member of each group towards its true label and replays that single
/// substitution on every member; a hit is a member then predicted as its true
/// label. The seed is part of the group.
CoverageReport eval_coverage(const Classifier& classifier, const DistractorStore& store, const Dataset& dataset,
                             const std::vector<std::string>& eval_ids, const SearchConfig& cfg,
                             std::size_t min_group_size = 1);

nlohmann::ordered_json to_json(const ComprehensibilityReport& report, const Manifest& manifest);
nlohmann::ordered_json to_json(const CoverageReport& report, const Manifest& manifest);

/// Aligned text table with columns: type (true, predicted), coverage %, N.
std::string coverage_table(const CoverageReport& report, const Manifest& manifest);
std::string comprehensibility_summary(const ComprehensibilityReport& report);

}  // namespace cfts
