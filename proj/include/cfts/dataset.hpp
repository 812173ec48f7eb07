#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfts/series.hpp"

namespace cfts {

using ClassIndex = std::size_t;

struct Manifest {
  std::vector<std::string> class_names;
  std::vector<std::string> variable_names;
  std::size_t timesteps = 0;

  std::size_t class_count() const noexcept { return class_names.size(); }
  std::size_t variable_count() const noexcept { return variable_names.size(); }

  /// Index of a class name; throws ConfigError listing the valid names.
  ClassIndex class_index(const std::string& name) const;
  /// Index of a variable name; throws ConfigError.
  std::size_t variable_index(const std::string& name) const;

  friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// Labeled collection of samples conforming to one manifest.
///
/// Samples iterate in lexicographic sample-id order, which is the canonical
/// "dataset order" used by every deterministic procedure in the library.
class Dataset {
 public:
  explicit Dataset(Manifest manifest);

  /// Adds a sample; throws DataError on shape mismatch, bad label or duplicate id.
  void add(const std::string& sample_id, MultivariateSeries sample, ClassIndex label);

  const Manifest& manifest() const noexcept { return manifest_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  bool contains(const std::string& sample_id) const { return samples_.count(sample_id) != 0; }

  /// Throws DataError("unknown sample ...") when absent.
  const MultivariateSeries& sample(const std::string& sample_id) const;
  ClassIndex label(const std::string& sample_id) const;

  /// Sample ids in dataset order.
  std::vector<std::string> ids() const;

  const std::map<std::string, MultivariateSeries>& samples() const noexcept { return samples_; }
  const std::map<std::string, ClassIndex>& labels() const noexcept { return labels_; }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  Manifest manifest_;
  std::map<std::string, MultivariateSeries> samples_;
  std::map<std::string, ClassIndex> labels_;
};

/// Reads `manifest.json`, `data.csv` and `labels.csv` from a directory.
Dataset load_dataset(const std::filesystem::path& root);

/// Writes the three dataset files; values use shortest round-trip decimal form.
void save_dataset(const Dataset& dataset, const std::filesystem::path& root);

struct FilterResult {
  Dataset kept;
  std::vector<std::string> removed;
};

inline constexpr double kDefaultStdThreshold = 0.1;

/// Removes samples whose flattened population std is below `threshold`,
/// restricted to `class_filter` when given.
FilterResult quality_filter(const Dataset& dataset, std::optional<ClassIndex> class_filter,
                            double threshold = kDefaultStdThreshold);

}  // namespace cfts
