#include "cfts/distractor_store.hpp"

#include <cmath>

#include "cfts/error.hpp"

namespace cfts {

namespace {
constexpr std::size_t kScoringChunk = 256;
}

DistractorStore DistractorStore::build(const Dataset& training, const Classifier& classifier) {
  if (training.empty()) throw DataError("cannot build a distractor store from an empty dataset");
  classifier.check_compatible(training.manifest());

  DistractorStore store;
  store.training_ = std::make_shared<const Dataset>(training);
  const std::size_t C = training.manifest().class_count();
  const std::size_t dim = training.manifest().variable_count() * training.manifest().timesteps;
  std::vector<std::vector<double>> points(C);
  store.ids_.assign(C, {});

  std::vector<std::string> chunk_ids;
  std::vector<MultivariateSeries> chunk;
  auto flush = [&] {
    if (chunk.empty()) return;
    const auto scores = classifier.predict_scores(chunk);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const ClassIndex truth = training.label(chunk_ids[i]);
      if (classifier.label_of(scores[i]) != truth) continue;
      auto v = chunk[i].values();
      points[truth].insert(points[truth].end(), v.begin(), v.end());
      store.ids_[truth].push_back(chunk_ids[i]);
    }
    chunk.clear();
    chunk_ids.clear();
  };
  // Dataset order is lexicographic by id, so tree insertion index order equals id order.
  for (const auto& [id, sample] : training.samples()) {
    chunk_ids.push_back(id);
    chunk.push_back(sample);
    if (chunk.size() == kScoringChunk) flush();
  }
  flush();

  store.trees_.reserve(C);
  for (std::size_t c = 0; c < C; ++c) store.trees_.emplace_back(dim, std::move(points[c]));
  return store;
}

std::vector<Distractor> DistractorStore::nearest(const MultivariateSeries& query, ClassIndex target,
                                                 std::size_t k) const {
  if (target >= trees_.size()) throw PreconditionError("target class " + std::to_string(target) + " out of range");
  if (k == 0) throw PreconditionError("k must be at least 1");
  const KdTree& tree = trees_[target];
  if (tree.empty()) {
    throw NoDistractorsError("no distractors available for class " + training_->manifest().class_names[target]);
  }
  if (query.values().size() != tree.dim()) throw PreconditionError("query shape does not match the store");
  std::vector<Distractor> out;
  for (const auto& n : tree.nearest(query.values(), k)) {
    out.push_back({ids_[target][n.index], std::sqrt(n.squared_distance)});
  }
  return out;
}

}  // namespace cfts
