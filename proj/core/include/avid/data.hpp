#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <torch/types.h>

#include "avid/digits.hpp"

namespace avid {

/// One grayscale video frame, H x W float32 in [0,1].
struct Frame {
  torch::Tensor pixels;
  std::int64_t index = 0;
};

using FrameSequence = std::vector<Frame>;

/// Three stacked channels <I'(t-4), I'(t-2), I'(t)>, 3 x H x W float32 in [0,1].
struct ModelInput {
  torch::Tensor channels;
  std::int64_t source_frame_index = 0;

  std::int64_t height() const { return channels.size(1); }
  std::int64_t width() const { return channels.size(2); }
};

struct NoiseConfig {
  double gamma = 0.4;
  double sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

struct NoisyInput {
  torch::Tensor channels;
  double gamma = 0.0;
  std::uint64_t seed = 0;
};

enum class Split { train, test };
enum class Layout { ir_mnist, frame_directory };

const char* to_string(Split split);
const char* to_string(Layout layout);
Split parse_split(const std::string& text);
Layout parse_layout(const std::string& text);

struct TileLabel {
  int row = 0;
  int col = 0;
  bool irregular = false;
};

/// One stored image or frame plus whatever ground truth came with it.
struct Sample {
  std::string clip;           // empty for still-image datasets
  std::int64_t index = 0;     // image index, or frame index t within the clip
  torch::Tensor image;        // H x W uint8
  std::optional<bool> irregular;
  torch::Tensor mask;         // H x W bool; undefined when no pixel ground truth
  std::vector<TileLabel> tiles;
};

struct Dataset {
  Split split = Split::train;
  Layout layout = Layout::ir_mnist;
  int tile_side = 0;  // side of one composite tile in pixels (ir_mnist only)
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

// ---------------------------------------------------------------------------
// IR-MNIST synthesis

struct IrMnistConfig {
  int n_train = 5000;
  int n_test = 1000;
  int grid_side = 11;
  int excluded_digit = 3;
  double irregular_rate_test = 0.1;
  std::uint64_t seed = 0;

  friend bool operator==(const IrMnistConfig&, const IrMnistConfig&) = default;
};

/// Provenance of one tile in one composite.
struct TileRecord {
  Split split = Split::train;
  int image_index = 0;
  int row = 0;
  int col = 0;
  int digit = 0;
  std::size_t source_index = 0;
};

struct IrMnistSplits {
  Dataset train;
  Dataset test;
  std::vector<TileRecord> tile_log;
};

/// Builds grid_side x grid_side composites of digit tiles. Train composites
/// never contain the excluded digit; each test tile is the excluded digit
/// with probability irregular_rate_test and a uniformly drawn other digit
/// otherwise. Test masks mark the stroke pixels of excluded-digit tiles.
IrMnistSplits generate_ir_mnist(const DigitSource& digits, const IrMnistConfig& cfg);

// ---------------------------------------------------------------------------
// Synthetic video

struct TextureClipConfig {
  int frames = 50;
  int height = 56;
  int width = 56;
  double speed = 1.0;                      // texture drift in pixels per frame
  std::vector<std::pair<int, int>> anomalies;  // [first, last] frame ranges with a planted object
  std::uint64_t seed = 0;
};

/// A drifting "walking" texture; frames inside an anomaly range carry a
/// fast-moving bright block with its pixel mask as ground truth.
Dataset synthesize_texture_clip(const TextureClipConfig& cfg, const std::string& clip_name);

// ---------------------------------------------------------------------------
// Preprocessing and noise

/// X = <I'(t-4), I'(t-2), I'(t)> with I'(t) = (I(t) + I(t-1)) / 2. `t` is a
/// position in `clip`; throws std::out_of_range unless 5 <= t < clip.size().
ModelInput preprocess_temporal(const FrameSequence& clip, std::size_t t);

/// Still image replicated into all three channels.
ModelInput replicate_channels(const torch::Tensor& gray_u8, std::int64_t index);

/// X + gamma * N(0, sigma^2), clamped to [0,1].
NoisyInput inject_noise(const ModelInput& x, const NoiseConfig& cfg);

/// gamma * eta with eta ~ N(0, sigma^2) i.i.d., before it is added or clamped.
torch::Tensor sample_noise(at::IntArrayRef shape, const NoiseConfig& cfg);

/// Batched form used by the trainer; `batch` is N x 3 x H x W.
torch::Tensor inject_noise(const torch::Tensor& batch, const NoiseConfig& cfg);

/// Zero-pads bottom/right so both sides are multiples of `multiple`.
torch::Tensor pad_to_multiple(const torch::Tensor& image, int multiple);

// ---------------------------------------------------------------------------
// Storage

/// Reads `root` in the given layout. For ir_mnist, `root` is the dataset
/// directory holding train/ and test/; for frame_directory it holds one
/// directory per clip. Throws LoadError naming the offending file.
Dataset load_dataset(const std::filesystem::path& root, Layout layout, Split split);

void write_dataset(const Dataset& data, const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Scorable inputs

/// The inputs a dataset yields for the networks: one per still image, or one
/// per frame with t >= 5 in each clip. Inputs are zero-padded to a multiple
/// of `pad_multiple` on the bottom/right, as are the ground-truth masks.
class InputSet {
 public:
  InputSet() = default;
  InputSet(std::shared_ptr<const Dataset> data, int pad_multiple);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  ModelInput input(std::size_t i) const;
  /// N x 3 x H x W float32.
  torch::Tensor batch(std::span<const std::size_t> indices) const;

  const Sample& sample(std::size_t i) const;
  /// Padded bool mask, or an undefined tensor when absent.
  torch::Tensor mask(std::size_t i) const;

  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }
  const Dataset& dataset() const { return *data_; }

  InputSet subset(std::vector<std::size_t> indices) const;
  /// Deterministically moves round(fraction * size) inputs (at least one)
  /// into the second set.
  std::pair<InputSet, InputSet> hold_out(double fraction, std::uint64_t seed) const;

 private:
  std::shared_ptr<const Dataset> data_;
  std::vector<std::size_t> entries_;  // sample index of the scored frame
  int pad_multiple_ = 1;
  std::int64_t height_ = 0;
  std::int64_t width_ = 0;
};

}  // namespace avid
