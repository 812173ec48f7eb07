#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cfts/builtin.hpp"
#include "cfts/dataset.hpp"

namespace cfts {

/// Planted-rule benchmark: a binary "abnormal"/"normal" dataset whose model is
/// a conjunction of interval rules over a known variable set. A sample is
/// normal iff every planted variable sits at the passing level inside its rule
/// window; all other variables are irrelevant to the model.
struct PlantedBenchmarkConfig {
  std::size_t variables = 8;
  std::size_t timesteps = 32;
  std::size_t planted = 2;
  std::size_t train_samples = 200;
  std::size_t test_samples = 60;
  /// Fraction of rule-violating test samples labeled "normal", i.e. samples
  /// the model misclassifies. These form the coverage groups.
  double mislabeled_fraction = 0.5;
  std::uint64_t seed = 7;
};

struct PlantedBenchmark {
  Dataset train;
  Dataset test;
  IntervalRuleSpec model;
  std::vector<std::size_t> planted;                              // ascending
  std::map<std::string, std::vector<std::size_t>> violations;    // per sample, ascending subset of planted
};

inline constexpr ClassIndex kAbnormalClass = 0;
inline constexpr ClassIndex kNormalClass = 1;

PlantedBenchmark make_planted_benchmark(const PlantedBenchmarkConfig& cfg);

/// Writes train/, test/, model.json and truth.json under `root`.
void write_planted_benchmark(const PlantedBenchmark& bench, const std::filesystem::path& root);

}  // namespace cfts
