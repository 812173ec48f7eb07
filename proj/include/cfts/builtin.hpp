#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cfts/classifier.hpp"

namespace cfts {

/// score_c = softmax(-d)_c, d_c = Euclidean distance from the flattened sample
/// to centroid c.
struct NearestCentroidSpec {
  std::size_t variables = 0;
  std::size_t timesteps = 0;
  std::vector<std::vector<double>> centroids;
};

/// Passes when the mean of `variable` over [t0, t1) exceeds `threshold`.
struct IntervalRule {
  std::size_t variable = 0;
  std::size_t t0 = 0;
  std::size_t t1 = 0;
  double threshold = 0.0;
  double gain = 1.0;
};

/// Binary conjunction of interval rules. The positive-class score is the
/// minimum over rules of logistic(gain * (window mean - threshold)); the other
/// class receives one minus that.
struct IntervalRuleSpec {
  std::size_t variables = 0;
  std::size_t timesteps = 0;
  std::vector<IntervalRule> rules;
  ClassIndex positive_class = 1;
};

/// Binary logistic model over per-variable means; class 1 is positive.
struct LinearMeansSpec {
  std::size_t variables = 0;
  std::size_t timesteps = 0;
  std::vector<double> weights;
  double bias = 0.0;
};

using BuiltinSpec = std::variant<NearestCentroidSpec, IntervalRuleSpec, LinearMeansSpec>;

double logistic(double x);

/// Validates the spec and returns a stateless scorer. Throws ConfigError.
std::shared_ptr<const Scorer> make_builtin(const BuiltinSpec& spec);

/// JSON encoding: {"kind": "nearest_centroid"|"interval_rule"|"linear_means", ...}.
BuiltinSpec builtin_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json builtin_spec_to_json(const BuiltinSpec& spec);
BuiltinSpec load_builtin_spec(const std::filesystem::path& path);

}  // namespace cfts
