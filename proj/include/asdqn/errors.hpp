#pragma once

#include <stdexcept>
#include <string>

namespace asdqn {

/// A configuration value failed validation. `key()` names the offending
/// parameter (a dotted path for harness configs, e.g. "sync.C").
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(long long step, const std::string& what)
      : std::runtime_error("diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}

  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

}  // namespace asdqn
