#include "cfts/classifier.hpp"

#include <cmath>
#include <string>

#include "cfts/error.hpp"

namespace cfts {

PredictionRule PredictionRule::thresholded(std::vector<double> thresholds,
                                           ClassIndex background_class) {
  PredictionRule rule;
  rule.kind_ = Kind::Thresholded;
  rule.thresholds_ = std::move(thresholds);
  rule.background_ = background_class;
  if (rule.background_ >= rule.thresholds_.size()) {
    throw ConfigError("background class " + std::to_string(background_class) +
                      " outside the threshold vector");
  }
  for (std::size_t c = 0; c < rule.thresholds_.size(); ++c) {
    if (c == rule.background_) continue;
    const double th = rule.thresholds_[c];
    if (!(th >= 0.0 && th <= 1.0)) {
      throw ConfigError("threshold for class " + std::to_string(c) + " must lie in [0, 1]");
    }
  }
  return rule;
}

void PredictionRule::validate(std::size_t class_count) const {
  if (class_count == 0) throw ConfigError("classifier has no classes");
  if (kind_ == Kind::Thresholded && thresholds_.size() != class_count) {
    throw ConfigError("rule has " + std::to_string(thresholds_.size()) + " thresholds but the model has " +
                      std::to_string(class_count) + " classes");
  }
}

ClassIndex PredictionRule::apply(std::span<const double> scores) const {
  if (kind_ == Kind::Argmax) {
    ClassIndex best = 0;
    for (ClassIndex c = 1; c < scores.size(); ++c) {
      if (scores[c] > scores[best]) best = c;
    }
    return best;
  }
  ClassIndex best = background_;
  double best_margin = 0.0;
  bool found = false;
  for (ClassIndex c = 0; c < scores.size(); ++c) {
    if (c == background_ || scores[c] < thresholds_[c]) continue;
    const double margin = scores[c] - thresholds_[c];
    if (!found || margin > best_margin) {
      best = c;
      best_margin = margin;
      found = true;
    }
  }
  return best;
}

Classifier::Classifier(std::shared_ptr<const Scorer> scorer, PredictionRule rule)
    : scorer_(std::move(scorer)), rule_(std::move(rule)) {
  if (!scorer_) throw ConfigError("null scorer");
  rule_.validate(scorer_->class_count());
}

std::vector<ScoreVector> Classifier::predict_scores(std::span<const MultivariateSeries> batch) const {
  if (batch.empty()) return {};
  const std::size_t V = variable_count();
  const std::size_t T = timesteps();
  for (const auto& s : batch) {
    if (s.variable_count() != V || s.timesteps() != T) {
      throw ScoringError("shape mismatch: model expects " + std::to_string(V) + "x" + std::to_string(T) +
                         ", got " + std::to_string(s.variable_count()) + "x" + std::to_string(s.timesteps()));
    }
  }
  auto scores = scorer_->score(batch);
  if (scores.size() != batch.size()) {
    throw ScoringError("model returned " + std::to_string(scores.size()) + " score vectors for a batch of " +
                       std::to_string(batch.size()));
  }
  const std::size_t C = class_count();
  for (const auto& sv : scores) {
    if (sv.size() != C) {
      throw ScoringError("score vector of length " + std::to_string(sv.size()) + ", expected " + std::to_string(C));
    }
    for (double x : sv) {
      if (!std::isfinite(x)) throw ScoringError("non-finite score from model");
      if (x < 0.0 || x > 1.0) throw ScoringError("score " + std::to_string(x) + " outside [0, 1]");
    }
  }
  return scores;
}

ClassIndex Classifier::predict_label(const MultivariateSeries& sample) const {
  return label_of(predict_scores(std::span(&sample, 1)).front());
}

void Classifier::check_compatible(const Manifest& manifest) const {
  if (manifest.variable_count() != variable_count() || manifest.timesteps != timesteps()) {
    throw ConfigError("model expects " + std::to_string(variable_count()) + " variables x " +
                      std::to_string(timesteps()) + " timesteps; dataset has " +
                      std::to_string(manifest.variable_count()) + " x " + std::to_string(manifest.timesteps));
  }
  if (manifest.class_count() != class_count()) {
    throw ConfigError("model has " + std::to_string(class_count()) + " classes; dataset has " +
                      std::to_string(manifest.class_count()));
  }
}

}  // namespace cfts
