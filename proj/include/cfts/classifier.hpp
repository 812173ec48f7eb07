#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cfts/dataset.hpp"
#include "cfts/series.hpp"

namespace cfts {

/// One score per class, each in [0, 1]. Entries need not sum to one.
using ScoreVector = std::vector<double>;

/// Maps a score vector to a single class label.
class PredictionRule {
 public:
  enum class Kind { Argmax, Thresholded };

  static PredictionRule argmax() { return PredictionRule(); }
  /// Per-class thresholds; the background class is returned when no other class
  /// meets its threshold. The background entry of `thresholds` is ignored.
  static PredictionRule thresholded(std::vector<double> thresholds, ClassIndex background_class);

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  ClassIndex background_class() const noexcept { return background_; }

  /// Throws ConfigError when the rule cannot apply to `class_count` classes.
  void validate(std::size_t class_count) const;

  /// Argmax: lowest index among the maxima. Thresholded: among non-background
  /// classes with score >= threshold, the largest margin (score - threshold),
  /// lowest index on ties; otherwise the background class.
  ClassIndex apply(std::span<const double> scores) const;

 private:
  PredictionRule() = default;

  Kind kind_ = Kind::Argmax;
  std::vector<double> thresholds_;
  ClassIndex background_ = 0;
};

/// Black-box scoring backend. Implementations must be deterministic and safe to
/// call from several threads.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::size_t class_count() const = 0;
  virtual std::size_t variable_count() const = 0;
  virtual std::size_t timesteps() const = 0;

  /// One raw score vector per input sample, in input order.
  virtual std::vector<ScoreVector> score(std::span<const MultivariateSeries> batch) const = 0;
};

/// A scorer paired with its prediction rule; the uniform model interface used
/// by the search and evaluation code.
class Classifier {
 public:
  Classifier(std::shared_ptr<const Scorer> scorer, PredictionRule rule);

  std::size_t class_count() const { return scorer_->class_count(); }
  std::size_t variable_count() const { return scorer_->variable_count(); }
  std::size_t timesteps() const { return scorer_->timesteps(); }
  const PredictionRule& rule() const noexcept { return rule_; }

  /// Validated scores; throws ScoringError on shape mismatch or invalid model output.
  std::vector<ScoreVector> predict_scores(std::span<const MultivariateSeries> batch) const;

  ClassIndex predict_label(const MultivariateSeries& sample) const;
  ClassIndex label_of(std::span<const double> scores) const { return rule_.apply(scores); }

  /// Throws ConfigError when the model cannot consume samples described by `manifest`.
  void check_compatible(const Manifest& manifest) const;

 private:
  std::shared_ptr<const Scorer> scorer_;
  PredictionRule rule_;
};

}  // namespace cfts
