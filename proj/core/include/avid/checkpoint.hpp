#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "avid/models.hpp"

namespace avid {

// Checkpoint archive layout (all integers little-endian):
//
//   magic    8 bytes  "AVIDCKPT"
//   version  u32      kCheckpointVersion
//   hlen     u64      length of the JSON header in bytes
//   header   hlen     UTF-8 JSON: format tag, kind, arch, step, rng_state,
//                     and a tensor table {name, shape, offset, count}
//   payload           float32 values of every tensor, in table order
//
// `offset` and `count` are in floats relative to the start of the payload.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointFormat[] = "avid-ckpt";

enum class CheckpointKind { inpainter, detector, pair };

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::pair;
  ArchConfig arch;
  long long step = 0;
  std::string rng_state;
  ParameterSnapshot inpainter;  // empty unless kind is inpainter or pair
  ParameterSnapshot detector;   // empty unless kind is detector or pair
  ParameterSnapshot extra;      // optimizer velocities and the like
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws LoadError for missing files, bad magic/version, or truncated data.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Builds models from `arch` and copies in whichever networks `ckpt` holds.
void apply_checkpoint(const Checkpoint& ckpt, Models& models);

std::string arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const std::string& text);

}  // namespace avid
