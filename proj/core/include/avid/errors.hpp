#pragma once

#include <stdexcept>
#include <string>

namespace avid {

/// Invalid configuration: bad layer spec, missing digit class, bad config file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A dataset file is missing or malformed. The message names the file.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training hit a non-finite loss or metric.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, long long step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

}  // namespace avid
