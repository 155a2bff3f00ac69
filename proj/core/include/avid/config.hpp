#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "avid/data.hpp"
#include "avid/detection.hpp"
#include "avid/evaluation.hpp"
#include "avid/models.hpp"
#include "avid/training.hpp"

namespace avid {

enum class Profile { full, quick };

const char* to_string(Profile profile);
Profile parse_profile(const std::string& text);

/// Everything a command can be configured with. Stored as flat key=value
/// text; the key table lives in config.cpp.
struct RunConfig {
  Profile profile = Profile::full;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::filesystem::path data;
  std::filesystem::path checkpoints;
  Layout layout = Layout::ir_mnist;
  Split split = Split::test;
  std::filesystem::path mnist_images;
  std::filesystem::path mnist_labels;
  int digits_per_class = 1000;

  IrMnistConfig generate;
  TrainConfig train;
  ArchConfig arch;
  Thresholds thresholds;
  SweepConfig sweep;
  EvalLevel level = EvalLevel::frame;
  double validation_fraction = 0.1;
  int threads = 1;

  /// Checks every field; throws ConfigError naming the offending key.
  void validate() const;

  bool operator==(const RunConfig& other) const;
};

using KeyValues = std::map<std::string, std::string>;

/// Defaults, then the profile's preset.
RunConfig preset(Profile profile);

/// Parses `key = value` lines; '#' starts a comment, blank lines are skipped.
/// Throws ConfigError "<source>:<line>: ..." on malformed lines or unknown keys.
KeyValues parse_key_values(const std::string& text, const std::string& source);
KeyValues read_key_values(const std::filesystem::path& path);

/// Applies known keys; throws ConfigError naming the key on a bad value.
void apply(RunConfig& config, const KeyValues& values);

KeyValues to_key_values(const RunConfig& config);
std::string format_config(const RunConfig& config);

/// profile from overrides, else from the file, else full; then preset,
/// file values, overrides, in that order.
RunConfig resolve_config(const KeyValues& file_values, const KeyValues& overrides);

bool is_known_key(const std::string& key);

}  // namespace avid
