#include "avid/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

#include <torch/torch.h>

#include "avid/errors.hpp"

namespace avid {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::filesystem::path& path, const std::uint8_t* data, int height, int width,
               int color_type, int channels) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failed for " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(data + static_cast<std::size_t>(y) * width * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

torch::Tensor read_png_gray(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw LoadError("cannot open " + path.string());

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw LoadError("not a PNG file: " + path.string());
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw LoadError("libpng init failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("corrupt PNG: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  const auto color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    // 601 luma: 0.299 R + 0.587 G + 0.114 B, in libpng's 1/100000 units.
    png_set_rgb_to_gray_fixed(png, 1, 29900, 58700);
  }
  png_read_update_info(png, info);

  const int height = static_cast<int>(png_get_image_height(png, info));
  const int width = static_cast<int>(png_get_image_width(png, info));
  const auto rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<png_size_t>(width)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw LoadError("unsupported PNG pixel format: " + path.string());
  }

  auto out = torch::empty({height, width}, torch::kUInt8);
  auto* base = out.data_ptr<std::uint8_t>();
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = base + static_cast<std::size_t>(y) * width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png_gray(const std::filesystem::path& path, const torch::Tensor& image) {
  if (image.dim() != 2) throw std::invalid_argument("write_png_gray expects H x W");
  auto u8 = image.scalar_type() == torch::kUInt8 ? image.contiguous() : to_u8(image);
  write_png(path, u8.data_ptr<std::uint8_t>(), static_cast<int>(u8.size(0)),
            static_cast<int>(u8.size(1)), PNG_COLOR_TYPE_GRAY, 1);
}

void write_png_rgb(const std::filesystem::path& path, const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) throw std::invalid_argument("write_png_rgb expects 3 x H x W");
  auto u8 = image.scalar_type() == torch::kUInt8 ? image : to_u8(image);
  auto hwc = u8.permute({1, 2, 0}).contiguous();
  write_png(path, hwc.data_ptr<std::uint8_t>(), static_cast<int>(hwc.size(0)),
            static_cast<int>(hwc.size(1)), PNG_COLOR_TYPE_RGB, 3);
}

torch::Tensor to_u8(const torch::Tensor& unit_interval) {
  if (unit_interval.scalar_type() == torch::kBool) {
    return unit_interval.to(torch::kUInt8).mul_(255).contiguous();
  }
  return unit_interval.to(torch::kFloat64).clamp(0.0, 1.0).mul(255.0).round().to(torch::kUInt8).contiguous();
}

torch::Tensor to_unit(const torch::Tensor& u8) {
  return u8.to(torch::kFloat32).div_(255.0f);
}

}  // namespace avid
