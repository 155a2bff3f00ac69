#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/nn/module.h>
#include <torch/nn/modules/container/modulelist.h>
#include <torch/nn/modules/conv.h>
#include <torch/nn/pimpl.h>

#include "avid/data.hpp"

namespace avid {

/// ((in, out), kernel, stride) of one convolution.
struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct DetectorSpec {
  std::vector<ConvSpec> layers;
  double leaky_slope = 0.2;

  /// 3->32 k5 s2, 32->64 k5 s2, 64->128 k3 s7, 128->64 k1, 64->1 k1.
  static DetectorSpec defaults();

  int total_stride() const;
  /// Receptive field side of one output cell, in input pixels.
  int receptive_field() const;
  void validate() const;

  friend bool operator==(const DetectorSpec&, const DetectorSpec&) = default;
};

struct InpainterSpec {
  std::vector<int> widths{64, 128, 256, 512};
  double leaky_slope = 0.2;
  // Adds logit(clamp(x, eps, 1 - eps)) to the head's pre-activation so the
  // untrained network starts near the identity.
  bool input_bias = false;

  void validate() const;

  friend bool operator==(const InpainterSpec&, const InpainterSpec&) = default;
};

struct ArchConfig {
  InpainterSpec inpainter;
  DetectorSpec detector = DetectorSpec::defaults();
  // Expected input size; 0 accepts any size the networks can process.
  std::int64_t input_height = 0;
  std::int64_t input_width = 0;

  void validate() const;

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

inline constexpr double kInputBiasEpsilon = 1e-3;

/// U-Net style encoder-decoder: stride-2 downsampling convolutions, nearest
/// upsampling back to each skip's size, concatenated skips, sigmoid output.
class InpainterImpl : public torch::nn::Module {
 public:
  explicit InpainterImpl(const InpainterSpec& spec, std::int64_t input_height = 0,
                         std::int64_t input_width = 0);

  /// N x 3 x H x W in, same shape out, values in (0,1).
  torch::Tensor forward(const torch::Tensor& x);
  /// Same, before the sigmoid.
  torch::Tensor logits(const torch::Tensor& x);

  const InpainterSpec& spec() const { return spec_; }

 private:
  InpainterSpec spec_;
  std::int64_t input_height_ = 0;
  std::int64_t input_width_ = 0;
  torch::nn::ModuleList encoder_{nullptr};
  torch::nn::ModuleList up_{nullptr};
  torch::nn::ModuleList merge_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Inpainter);

/// Horizontal/vertical shift and trailing size adjustment that align output
/// cell (a, b) with the input block of side total_stride at (a, b).
struct DetectorAlignment {
  int lead = 0;   // pad (>0) or crop (<0) at top/left
  int trail = 0;  // pad (>0) or crop (<0) at bottom/right
};

/// Fully convolutional scorer: stride-only convolutions, leaky rectifiers
/// between layers, sigmoid on the single output channel.
class DetectorImpl : public torch::nn::Module {
 public:
  explicit DetectorImpl(const DetectorSpec& spec, std::int64_t input_height = 0,
                        std::int64_t input_width = 0);

  /// N x 3 x H x W in, N x n1 x n2 regularity scores in (0,1) out.
  torch::Tensor forward(const torch::Tensor& x);
  /// Same, before the sigmoid.
  torch::Tensor logits(const torch::Tensor& x);

  /// (n1, n2) for an H x W input. Throws ConfigError unless both sides are
  /// positive multiples of the total stride.
  std::pair<std::int64_t, std::int64_t> output_grid(std::int64_t height, std::int64_t width) const;

  const DetectorSpec& spec() const { return spec_; }

 private:
  DetectorAlignment alignment(std::int64_t side) const;

  DetectorSpec spec_;
  std::int64_t input_height_ = 0;
  std::int64_t input_width_ = 0;
  torch::nn::ModuleList layers_{nullptr};
};
TORCH_MODULE(Detector);

/// n1 x n2 regularity likelihoods for one input. Cells are addressed
/// row-major: flat index i = row * cols + col (zero-based).
struct ScoreGrid {
  torch::Tensor values;  // n1 x n2 float

  std::int64_t rows() const { return values.size(0); }
  std::int64_t cols() const { return values.size(1); }
  std::int64_t size() const { return rows() * cols(); }
  std::int64_t flat_index(std::int64_t row, std::int64_t col) const { return row * cols() + col; }
  std::pair<std::int64_t, std::int64_t> cell(std::int64_t flat) const {
    return {flat / cols(), flat % cols()};
  }
};

struct Region {
  std::int64_t top = 0;
  std::int64_t left = 0;
  std::int64_t height = 0;
  std::int64_t width = 0;

  friend bool operator==(const Region&, const Region&) = default;
};

/// Pixel footprint of every score cell, in the same flat order as ScoreGrid.
struct RegionGrid {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::int64_t frame_height = 0;
  std::int64_t frame_width = 0;
  std::vector<Region> blocks;

  std::int64_t block_height() const { return frame_height / rows; }
  std::int64_t block_width() const { return frame_width / cols; }
  /// Flat index of the block containing pixel (y, x).
  std::int64_t block_of(std::int64_t y, std::int64_t x) const {
    return (y / block_height()) * cols + x / block_width();
  }
};

struct Models {
  Inpainter inpainter{nullptr};
  Detector detector{nullptr};
  ArchConfig arch;
};

/// Zero biases; weights ~ N(0, 2 / (in_channels * k^2)). Bit-reproducible.
Models init_models(const ArchConfig& arch, std::uint64_t seed);

ModelInput inpainter_forward(Inpainter& model, const ModelInput& x);
ModelInput inpainter_forward(Inpainter& model, const NoisyInput& x);
ScoreGrid detector_forward(Detector& model, const ModelInput& x);

RegionGrid region_map(const DetectorSpec& spec, std::int64_t height, std::int64_t width);

/// Sum over layers of in*out*k^2 + out.
std::int64_t parameter_count(const DetectorSpec& spec);
std::int64_t parameter_count(torch::nn::Module& module);

using ParameterSnapshot = std::vector<std::pair<std::string, torch::Tensor>>;

/// Deep copy of all parameters, in registration order.
ParameterSnapshot snapshot(const torch::nn::Module& module);
/// Copies values into `module`; names and shapes must match.
void restore(torch::nn::Module& module, const ParameterSnapshot& params);

/// Throws std::invalid_argument unless `x` is N x 3 x H x W and, when the
/// expected size is nonzero, H x W matches it.
void check_input_shape(const torch::Tensor& x, std::int64_t height, std::int64_t width);

}  // namespace avid
