#include "cfts/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "cfts/error.hpp"

namespace cfts {

namespace {

constexpr double kPassLevel = 1.0;
constexpr double kFailLevel = 0.0;
constexpr double kThreshold = 0.5;
constexpr double kGain = 8.0;
// Wave plus noise stays within +/-0.4 of the level, so window means never cross the threshold.
constexpr double kWaveAmplitude = 0.2;
constexpr double kNoiseAmplitude = 0.2;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

 private:
  std::mt19937_64 engine_;
};

std::string make_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%05zu", prefix, i);
  return buf;
}

MultivariateSeries make_sample(Rng& rng, const PlantedBenchmarkConfig& cfg, const std::vector<std::string>& names,
                               const std::vector<std::size_t>& planted, const std::vector<std::size_t>& violated) {
  std::vector<double> values(cfg.variables * cfg.timesteps);
  for (std::size_t v = 0; v < cfg.variables; ++v) {
    double level;
    if (std::find(planted.begin(), planted.end(), v) != planted.end()) {
      level = std::find(violated.begin(), violated.end(), v) != violated.end() ? kFailLevel : kPassLevel;
    } else {
      level = rng.uniform(-1.0, 2.0);
    }
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double period = rng.uniform(6.0, 16.0);
    for (std::size_t t = 0; t < cfg.timesteps; ++t) {
      values[v * cfg.timesteps + t] = level +
                                      kWaveAmplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase) +
                                      rng.uniform(-kNoiseAmplitude, kNoiseAmplitude);
    }
  }
  return MultivariateSeries(names, cfg.timesteps, std::move(values));
}

std::vector<std::size_t> random_nonempty_subset(Rng& rng, const std::vector<std::size_t>& from) {
  while (true) {
    std::vector<std::size_t> out;
    for (std::size_t v : from) {
      if (rng.uniform() < 0.5) out.push_back(v);
    }
    if (!out.empty()) return out;
  }
}

}  // namespace

PlantedBenchmark make_planted_benchmark(const PlantedBenchmarkConfig& cfg) {
  if (cfg.variables == 0 || cfg.timesteps == 0) throw ConfigError("benchmark needs variables and timesteps >= 1");
  if (cfg.planted == 0 || cfg.planted > cfg.variables) throw ConfigError("planted count must be in [1, variables]");
  if (cfg.train_samples < 2) throw ConfigError("benchmark needs at least two training samples");
  if (!(cfg.mislabeled_fraction >= 0.0 && cfg.mislabeled_fraction <= 1.0)) {
    throw ConfigError("mislabeled fraction must lie in [0, 1]");
  }
  Rng rng(cfg.seed);

  std::vector<std::string> names;
  for (std::size_t v = 0; v < cfg.variables; ++v) names.push_back("var" + std::to_string(v));
  Manifest manifest{{"abnormal", "normal"}, names, cfg.timesteps};

  std::vector<std::size_t> all(cfg.variables);
  for (std::size_t v = 0; v < cfg.variables; ++v) all[v] = v;
  for (std::size_t i = 0; i < cfg.planted; ++i) std::swap(all[i], all[i + rng.below(cfg.variables - i)]);
  std::vector<std::size_t> planted(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cfg.planted));
  std::sort(planted.begin(), planted.end());

  IntervalRuleSpec model{cfg.variables, cfg.timesteps, {}, kNormalClass};
  const std::size_t width = std::max<std::size_t>(1, cfg.timesteps / 2);
  for (std::size_t v : planted) {
    const std::size_t t0 = rng.below(cfg.timesteps - width + 1);
    model.rules.push_back(IntervalRule{v, t0, t0 + width, kThreshold, kGain});
  }

  PlantedBenchmark bench{Dataset(manifest), Dataset(manifest), model, planted, {}};
  for (std::size_t i = 0; i < cfg.train_samples; ++i) {
    const std::string id = make_id("train", i);
    // Alternate so both classes are always represented.
    std::vector<std::size_t> violated = i % 2 == 0 ? std::vector<std::size_t>{} : random_nonempty_subset(rng, planted);
    bench.train.add(id, make_sample(rng, cfg, names, planted, violated),
                    violated.empty() ? kNormalClass : kAbnormalClass);
    bench.violations[id] = std::move(violated);
  }
  for (std::size_t i = 0; i < cfg.test_samples; ++i) {
    const std::string id = make_id("test", i);
    // Test samples mostly violate at least one rule so they have something to explain.
    std::vector<std::size_t> violated = i % 5 == 4 ? std::vector<std::size_t>{} : random_nonempty_subset(rng, planted);
    ClassIndex label = violated.empty() ? kNormalClass : kAbnormalClass;
    if (!violated.empty() && rng.uniform() < cfg.mislabeled_fraction) label = kNormalClass;
    bench.test.add(id, make_sample(rng, cfg, names, planted, violated), label);
    bench.violations[id] = std::move(violated);
  }
  return bench;
}

void write_planted_benchmark(const PlantedBenchmark& bench, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  save_dataset(bench.train, root / "train");
  save_dataset(bench.test, root / "test");
  {
    std::ofstream out(root / "model.json");
    out << builtin_spec_to_json(bench.model).dump(2) << '\n';
    if (!out) throw DataError("cannot write " + (root / "model.json").string());
  }
  {
    nlohmann::ordered_json truth;
    std::vector<std::string> planted_names;
    for (std::size_t v : bench.planted) planted_names.push_back(bench.train.manifest().variable_names[v]);
    truth["planted"] = planted_names;
    nlohmann::ordered_json violations = nlohmann::ordered_json::object();
    for (const auto& [id, vars] : bench.violations) {
      std::vector<std::string> names;
      for (std::size_t v : vars) names.push_back(bench.train.manifest().variable_names[v]);
      violations[id] = names;
    }
    truth["violations"] = std::move(violations);
    std::ofstream out(root / "truth.json");
    out << truth.dump(2) << '\n';
    if (!out) throw DataError("cannot write " + (root / "truth.json").string());
  }
}

}  // namespace cfts
