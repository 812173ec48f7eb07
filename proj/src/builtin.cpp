#include "cfts/builtin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "cfts/error.hpp"

namespace cfts {

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

void check_shape(std::size_t variables, std::size_t timesteps) {
  if (variables == 0 || timesteps == 0) throw ConfigError("builtin model needs variables >= 1 and timesteps >= 1");
}

double window_mean(const MultivariateSeries& s, std::size_t v, std::size_t t0, std::size_t t1) {
  auto row = s.row(v);
  return std::accumulate(row.begin() + t0, row.begin() + t1, 0.0) / static_cast<double>(t1 - t0);
}

class NearestCentroidScorer final : public Scorer {
 public:
  explicit NearestCentroidScorer(NearestCentroidSpec spec) : spec_(std::move(spec)) {
    check_shape(spec_.variables, spec_.timesteps);
    if (spec_.centroids.size() < 2) throw ConfigError("nearest_centroid needs at least two centroids");
    for (const auto& c : spec_.centroids) {
      if (c.size() != spec_.variables * spec_.timesteps) {
        throw ConfigError("nearest_centroid centroid length " + std::to_string(c.size()) + ", expected " +
                          std::to_string(spec_.variables * spec_.timesteps));
      }
      for (double x : c) {
        if (!std::isfinite(x)) throw ConfigError("nearest_centroid centroid has a non-finite entry");
      }
    }
  }

  std::size_t class_count() const override { return spec_.centroids.size(); }
  std::size_t variable_count() const override { return spec_.variables; }
  std::size_t timesteps() const override { return spec_.timesteps; }

  std::vector<ScoreVector> score(std::span<const MultivariateSeries> batch) const override {
    std::vector<ScoreVector> out;
    out.reserve(batch.size());
    const std::size_t C = spec_.centroids.size();
    for (const auto& s : batch) {
      auto x = s.values();
      std::vector<double> d(C);
      for (std::size_t c = 0; c < C; ++c) {
        double ss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double diff = x[i] - spec_.centroids[c][i];
          ss += diff * diff;
        }
        d[c] = std::sqrt(ss);
      }
      // exp(-d_c) / sum exp(-d_k), shifted by the smallest distance for stability.
      const double dmin = *std::min_element(d.begin(), d.end());
      ScoreVector sv(C);
      double total = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        sv[c] = std::exp(-(d[c] - dmin));
        total += sv[c];
      }
      for (auto& v : sv) v /= total;
      out.push_back(std::move(sv));
    }
    return out;
  }

 private:
  NearestCentroidSpec spec_;
};

class IntervalRuleScorer final : public Scorer {
 public:
  explicit IntervalRuleScorer(IntervalRuleSpec spec) : spec_(std::move(spec)) {
    check_shape(spec_.variables, spec_.timesteps);
    if (spec_.rules.empty()) throw ConfigError("interval_rule needs at least one rule");
    if (spec_.positive_class > 1) throw ConfigError("interval_rule positive_class must be 0 or 1");
    for (const auto& r : spec_.rules) {
      if (r.variable >= spec_.variables) {
        throw ConfigError("interval_rule variable " + std::to_string(r.variable) + " out of range");
      }
      if (!(r.t0 < r.t1 && r.t1 <= spec_.timesteps)) {
        throw ConfigError("interval_rule window [" + std::to_string(r.t0) + ", " + std::to_string(r.t1) +
                          ") out of range for " + std::to_string(spec_.timesteps) + " timesteps");
      }
      if (!std::isfinite(r.threshold) || !std::isfinite(r.gain)) {
        throw ConfigError("interval_rule threshold and gain must be finite");
      }
    }
  }

  std::size_t class_count() const override { return 2; }
  std::size_t variable_count() const override { return spec_.variables; }
  std::size_t timesteps() const override { return spec_.timesteps; }

  std::vector<ScoreVector> score(std::span<const MultivariateSeries> batch) const override {
    std::vector<ScoreVector> out;
    out.reserve(batch.size());
    for (const auto& s : batch) {
      double positive = 1.0;
      for (const auto& r : spec_.rules) {
        const double m = window_mean(s, r.variable, r.t0, r.t1);
        positive = std::min(positive, logistic(r.gain * (m - r.threshold)));
      }
      ScoreVector sv(2);
      sv[spec_.positive_class] = positive;
      sv[1 - spec_.positive_class] = 1.0 - positive;
      out.push_back(std::move(sv));
    }
    return out;
  }

 private:
  IntervalRuleSpec spec_;
};

class LinearMeansScorer final : public Scorer {
 public:
  explicit LinearMeansScorer(LinearMeansSpec spec) : spec_(std::move(spec)) {
    check_shape(spec_.variables, spec_.timesteps);
    if (spec_.weights.size() != spec_.variables) {
      throw ConfigError("linear_means has " + std::to_string(spec_.weights.size()) + " weights for " +
                        std::to_string(spec_.variables) + " variables");
    }
    for (double w : spec_.weights) {
      if (!std::isfinite(w)) throw ConfigError("linear_means weight is not finite");
    }
    if (!std::isfinite(spec_.bias)) throw ConfigError("linear_means bias is not finite");
  }

  std::size_t class_count() const override { return 2; }
  std::size_t variable_count() const override { return spec_.variables; }
  std::size_t timesteps() const override { return spec_.timesteps; }

  std::vector<ScoreVector> score(std::span<const MultivariateSeries> batch) const override {
    std::vector<ScoreVector> out;
    out.reserve(batch.size());
    for (const auto& s : batch) {
      double z = spec_.bias;
      for (std::size_t v = 0; v < spec_.variables; ++v) {
        z += spec_.weights[v] * window_mean(s, v, 0, spec_.timesteps);
      }
      const double p = logistic(z);
      out.push_back({1.0 - p, p});
    }
    return out;
  }

 private:
  LinearMeansSpec spec_;
};

template <typename T>
T field(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("builtin spec field '") + key + "': " + e.what());
  }
}

}  // namespace

std::shared_ptr<const Scorer> make_builtin(const BuiltinSpec& spec) {
  return std::visit(
      [](const auto& s) -> std::shared_ptr<const Scorer> {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, NearestCentroidSpec>) return std::make_shared<NearestCentroidScorer>(s);
        if constexpr (std::is_same_v<S, IntervalRuleSpec>) return std::make_shared<IntervalRuleScorer>(s);
        if constexpr (std::is_same_v<S, LinearMeansSpec>) return std::make_shared<LinearMeansScorer>(s);
      },
      spec);
}

BuiltinSpec builtin_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("builtin spec must be a JSON object");
  const auto kind = field<std::string>(j, "kind");
  const auto variables = field<std::size_t>(j, "variables");
  const auto timesteps = field<std::size_t>(j, "timesteps");
  if (kind == "nearest_centroid") {
    return NearestCentroidSpec{variables, timesteps, field<std::vector<std::vector<double>>>(j, "centroids")};
  }
  if (kind == "interval_rule") {
    IntervalRuleSpec spec{variables, timesteps, {}, 1};
    if (j.contains("positive_class")) spec.positive_class = field<std::size_t>(j, "positive_class");
    const auto rules = field<nlohmann::json>(j, "rules");
    if (!rules.is_array()) throw ConfigError("builtin spec field 'rules' must be an array");
    for (const auto& r : rules) {
      spec.rules.push_back(IntervalRule{field<std::size_t>(r, "variable"), field<std::size_t>(r, "t0"),
                                        field<std::size_t>(r, "t1"), field<double>(r, "threshold"),
                                        field<double>(r, "gain")});
    }
    return spec;
  }
  if (kind == "linear_means") {
    return LinearMeansSpec{variables, timesteps, field<std::vector<double>>(j, "weights"),
                           j.contains("bias") ? field<double>(j, "bias") : 0.0};
  }
  throw ConfigError("unknown builtin kind '" + kind + "' (expected nearest_centroid, interval_rule, linear_means)");
}

nlohmann::ordered_json builtin_spec_to_json(const BuiltinSpec& spec) {
  nlohmann::ordered_json j;
  std::visit(
      [&j](const auto& s) {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, NearestCentroidSpec>) {
          j["kind"] = "nearest_centroid";
          j["variables"] = s.variables;
          j["timesteps"] = s.timesteps;
          j["centroids"] = s.centroids;
        } else if constexpr (std::is_same_v<S, IntervalRuleSpec>) {
          j["kind"] = "interval_rule";
          j["variables"] = s.variables;
          j["timesteps"] = s.timesteps;
          j["positive_class"] = s.positive_class;
          auto rules = nlohmann::ordered_json::array();
          for (const auto& r : s.rules) {
            rules.push_back({{"variable", r.variable}, {"t0", r.t0}, {"t1", r.t1},
                             {"threshold", r.threshold}, {"gain", r.gain}});
          }
          j["rules"] = std::move(rules);
        } else {
          j["kind"] = "linear_means";
          j["variables"] = s.variables;
          j["timesteps"] = s.timesteps;
          j["weights"] = s.weights;
          j["bias"] = s.bias;
        }
      },
      spec);
  return j;
}

BuiltinSpec load_builtin_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open builtin model spec " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return builtin_spec_from_json(j);
}

}  // namespace cfts
