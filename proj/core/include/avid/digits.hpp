#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/types.h>

namespace avid {

inline constexpr int kDigitSide = 28;

/// A labeled collection of 28x28 digit images (uint8, white strokes on black).
struct DigitSource {
  std::vector<torch::Tensor> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  /// Indices of samples carrying `label`, in source order.
  std::vector<std::size_t> indices_of(int label) const;
};

/// Loads MNIST from its IDX files (optionally gzip-free raw files only).
DigitSource load_mnist_idx(const std::filesystem::path& images_file,
                           const std::filesystem::path& labels_file);

/// Procedural handwritten-style digits: stroke skeletons per class, randomly
/// warped (rotation, scale, shear, offset) and rendered with a random pen
/// width, centered in a 20x20 box like MNIST. Deterministic under `seed`.
DigitSource synthesize_digits(int per_class, std::uint64_t seed);

/// Renders one digit with the given generator state.
torch::Tensor render_digit(int label, std::uint64_t seed);

}  // namespace avid
