#pragma once

#include <stdexcept>
#include <string>

namespace ditra {

// Invalid shapes, bad operands, misuse of the tape.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad key=value input: unknown key, unparsable value, bad file.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint I/O failures, kept as distinct categories so callers can react.
struct CheckpointError : std::runtime_error {
  enum class Kind { bad_magic, truncated, hash_mismatch, malformed };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg)
      : std::runtime_error(msg), kind(k) {}
};

// Training aborts: divergence, failed pretraining target, bad plan.
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ditra
