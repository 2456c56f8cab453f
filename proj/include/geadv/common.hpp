#pragma once

#include <stdexcept>
#include <string>

namespace geadv {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid user-supplied configuration (unknown arch, bad ranges, unknown keys).
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config: " + msg) {}
};

/// Violated call contract (shape mismatch, bad label range).
struct ContractError : Error {
  explicit ContractError(const std::string& msg) : Error("contract: " + msg) {}
};

/// Malformed file content (bad magic, version, truncation).
struct ParseError : Error {
  explicit ParseError(const std::string& msg) : Error("parse: " + msg) {}
};

/// Training failure (non-finite loss).
struct TrainingError : Error {
  explicit TrainingError(const std::string& msg) : Error("training: " + msg) {}
};

/// Attack aborted mid-run (non-finite oracle output).
struct AttackError : Error {
  explicit AttackError(const std::string& msg) : Error("attack: " + msg) {}
};

}  // namespace geadv
