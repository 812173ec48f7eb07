#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "cfts/classifier.hpp"
#include "cfts/dataset.hpp"
#include "cfts/kdtree.hpp"

namespace cfts {

struct Distractor {
  std::string sample_id;
  double distance;
};

/// Per-class KD-trees over the flattened training samples that the classifier
/// labels correctly. Immutable after build.
class DistractorStore {
 public:
  /// Scores every sample once and indexes the correctly classified ones under
  /// their true label. Scoring errors propagate.
  static DistractorStore build(const Dataset& training, const Classifier& classifier);

  std::size_t class_count() const noexcept { return trees_.size(); }
  std::size_t indexed_count(ClassIndex c) const { return trees_.at(c).size(); }
  /// Indexed ids of a class in dataset order.
  const std::vector<std::string>& indexed_ids(ClassIndex c) const { return ids_.at(c); }

  /// The min(k, indexed_count(target)) nearest distractors of class `target`,
  /// ascending by Euclidean distance, ties by sample id.
  /// Throws NoDistractorsError when the class has no indexed samples.
  std::vector<Distractor> nearest(const MultivariateSeries& query, ClassIndex target, std::size_t k) const;

  const Dataset& training() const noexcept { return *training_; }
  /// True for every sample id of the training dataset, indexed or not.
  bool is_training_id(const std::string& id) const { return training_->contains(id); }

 private:
  std::shared_ptr<const Dataset> training_;
  std::vector<KdTree> trees_;
  std::vector<std::vector<std::string>> ids_;
};

}  // namespace cfts
