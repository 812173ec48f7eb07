#pragma once

#include <stdexcept>
#include <string>

namespace cfts {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent dataset content (ingestion, shape, referential integrity).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration: builtin model specs, prediction rules, search settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The model could not produce a valid score batch.
class ScoringError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (e.g. sample already predicted as target).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The target class has no indexed distractors.
class NoDistractorsError : public Error {
 public:
  using Error::Error;
};

/// Search exhausted every distractor without flipping the prediction.
class NoCounterfactualError : public Error {
 public:
  NoCounterfactualError(const std::string& what, double best_infeasible_score)
      : Error(what), best_infeasible_score_(best_infeasible_score) {}

  double best_infeasible_score() const noexcept { return best_infeasible_score_; }

 private:
  double best_infeasible_score_;
};

}  // namespace cfts
