#pragma once

#include <filesystem>

#include <torch/types.h>

namespace avid {

// 8-bit PNG helpers. Tensors are H x W (gray) or 3 x H x W (RGB), uint8.

/// Reads any 8-bit/16-bit PNG and converts it to an H x W uint8 gray tensor
/// (color inputs are reduced with ITU-R 601 luma weights).
torch::Tensor read_png_gray(const std::filesystem::path& path);

void write_png_gray(const std::filesystem::path& path, const torch::Tensor& image);
void write_png_rgb(const std::filesystem::path& path, const torch::Tensor& image);

/// Maps [0,1] floats to uint8 with rounding; values outside are clamped.
torch::Tensor to_u8(const torch::Tensor& unit_interval);

/// Maps uint8 to float32 in [0,1].
torch::Tensor to_unit(const torch::Tensor& u8);

}  // namespace avid
