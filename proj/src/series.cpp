#include "cfts/series.hpp"

#include <cmath>
#include <numeric>
#include <unordered_set>

#include "cfts/error.hpp"

namespace cfts {

MultivariateSeries::MultivariateSeries(std::vector<std::string> variables, std::size_t timesteps,
                                       std::vector<double> values,
                                       std::optional<double> sample_rate_hz)
    : variables_(std::move(variables)),
      timesteps_(timesteps),
      values_(std::move(values)),
      sample_rate_hz_(sample_rate_hz) {
  if (variables_.empty()) throw DataError("series must have at least one variable");
  if (timesteps_ == 0) throw DataError("series must have at least one timestep");
  if (values_.size() != variables_.size() * timesteps_) {
    throw DataError("series has " + std::to_string(values_.size()) + " values, expected " +
                    std::to_string(variables_.size() * timesteps_));
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : variables_) {
    if (name.empty()) throw DataError("empty variable name");
    if (!seen.insert(name).second) throw DataError("duplicate variable name '" + name + "'");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw DataError("non-finite value in series");
  }
  if (sample_rate_hz_ && !(*sample_rate_hz_ > 0.0 && std::isfinite(*sample_rate_hz_))) {
    throw DataError("sample rate must be a positive finite number");
  }
}

MultivariateSeries MultivariateSeries::from_rows(std::vector<std::string> variables,
                                                 const std::vector<std::vector<double>>& rows) {
  if (rows.size() != variables.size()) throw DataError("row count differs from variable count");
  const std::size_t t = rows.empty() ? 0 : rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * t);
  for (const auto& r : rows) {
    if (r.size() != t) throw DataError("ragged rows");
    values.insert(values.end(), r.begin(), r.end());
  }
  return MultivariateSeries(std::move(variables), t, std::move(values));
}

std::vector<double> flatten(const MultivariateSeries& sample) {
  auto v = sample.values();
  return {v.begin(), v.end()};
}

MultivariateSeries reshape(std::span<const double> flat, std::vector<std::string> variables,
                           std::size_t timesteps) {
  return MultivariateSeries(std::move(variables), timesteps,
                            std::vector<double>(flat.begin(), flat.end()));
}

double population_stddev(std::span<const double> values) {
  if (values.empty()) return 0.0;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

}  // namespace cfts
