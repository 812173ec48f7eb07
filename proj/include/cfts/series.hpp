#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cfts {

/// One multivariate sample: V named variables by T timesteps, stored variable-major.
///
/// Construction validates shape, finiteness and name uniqueness, after which the
/// object is immutable.
class MultivariateSeries {
 public:
  MultivariateSeries(std::vector<std::string> variables, std::size_t timesteps,
                     std::vector<double> values,
                     std::optional<double> sample_rate_hz = std::nullopt);

  /// Builds a series from one row per variable.
  static MultivariateSeries from_rows(std::vector<std::string> variables,
                                      const std::vector<std::vector<double>>& rows);

  std::size_t variable_count() const noexcept { return variables_.size(); }
  std::size_t timesteps() const noexcept { return timesteps_; }
  const std::vector<std::string>& variables() const noexcept { return variables_; }
  std::optional<double> sample_rate_hz() const noexcept { return sample_rate_hz_; }

  double at(std::size_t variable, std::size_t t) const { return values_[variable * timesteps_ + t]; }
  std::span<const double> row(std::size_t variable) const {
    return std::span<const double>(values_).subspan(variable * timesteps_, timesteps_);
  }
  /// The contiguous variable-major storage; identical to flatten().
  std::span<const double> values() const noexcept { return values_; }

  bool same_shape(const MultivariateSeries& other) const noexcept {
    return timesteps_ == other.timesteps_ && variables_ == other.variables_;
  }

  friend bool operator==(const MultivariateSeries&, const MultivariateSeries&) = default;

 private:
  std::vector<std::string> variables_;
  std::size_t timesteps_;
  std::vector<double> values_;
  std::optional<double> sample_rate_hz_;
};

/// Concatenation of the variable rows in order (length V*T).
std::vector<double> flatten(const MultivariateSeries& sample);

/// Inverse of flatten for a known variable list and timestep count.
MultivariateSeries reshape(std::span<const double> flat, std::vector<std::string> variables,
                           std::size_t timesteps);

/// Population standard deviation of the flattened sample.
double population_stddev(std::span<const double> values);

}  // namespace cfts
