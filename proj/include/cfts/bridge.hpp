#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cfts/classifier.hpp"
#include "cfts/error.hpp"

namespace cfts {

/// Serves a model from a child process speaking line-delimited JSON over
/// stdin/stdout:
///
///   child -> {"type":"hello","class_count":C,"variables":V,"timesteps":T}
///   engine -> {"type":"predict","id":n,"samples":[[[T floats] x V] x B]}
///   child -> {"type":"scores","id":n,"scores":[[C floats] x B]}
///          | {"type":"error","id":n,"message":"..."}
///
/// Closing the child's stdin asks it to exit.
struct BridgeConfig {
  std::vector<std::string> command;
  std::int64_t startup_timeout_ms = 10000;
  std::int64_t request_timeout_ms = 30000;
};

struct ModelShape {
  std::size_t class_count = 0;
  std::size_t variables = 0;
  std::size_t timesteps = 0;
};

enum class BridgeErrorKind {
  Spawn,
  HandshakeTimeout,
  DeclarationMismatch,
  ChildExited,
  Protocol,
  Timeout,
  IdMismatch,
  WrongLength,
  NonFinite,
  Remote,
};

const char* to_string(BridgeErrorKind kind);

class BridgeError : public ScoringError {
 public:
  BridgeError(BridgeErrorKind kind, const std::string& what)
      : ScoringError(std::string("bridge ") + to_string(kind) + ": " + what), kind_(kind) {}

  BridgeErrorKind kind() const noexcept { return kind_; }

 private:
  BridgeErrorKind kind_;
};

/// Scorer backed by a child process. Requests are strictly sequential; concurrent
/// callers are served in arrival order. Destruction closes stdin and reaps the
/// child, killing it if it outlives the startup timeout.
class BridgeScorer final : public Scorer {
 public:
  /// Spawns the child and validates its hello line against `expected`.
  static std::shared_ptr<BridgeScorer> open(const BridgeConfig& config, const ModelShape& expected);

  ~BridgeScorer() override;
  BridgeScorer(const BridgeScorer&) = delete;
  BridgeScorer& operator=(const BridgeScorer&) = delete;

  std::size_t class_count() const override;
  std::size_t variable_count() const override;
  std::size_t timesteps() const override;

  std::vector<ScoreVector> score(std::span<const MultivariateSeries> batch) const override;

  /// Closes the child's stdin and waits for it to exit. Idempotent.
  void close();

  /// Process id of the child (for diagnostics and tests).
  int child_pid() const;

 private:
  struct Impl;
  explicit BridgeScorer(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

/// Convenience wrapper producing a Classifier from a bridge child.
Classifier bridge_open(const BridgeConfig& config, const ModelShape& expected, PredictionRule rule);

/// Splits a command line on whitespace, honoring single and double quotes.
std::vector<std::string> split_command_line(const std::string& line);

}  // namespace cfts
