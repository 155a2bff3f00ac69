#include "avid/digits.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <torch/torch.h>

#include "avid/errors.hpp"

namespace avid {
namespace {

struct Point {
  double x;
  double y;
};
using Stroke = std::vector<Point>;

Stroke arc(Point center, double rx, double ry, double from_deg, double to_deg, int steps = 24) {
  Stroke s;
  for (int i = 0; i <= steps; ++i) {
    const double t = (from_deg + (to_deg - from_deg) * i / steps) * std::numbers::pi / 180.0;
    s.push_back({center.x + rx * std::cos(t), center.y + ry * std::sin(t)});
  }
  return s;
}

Stroke concat(Stroke a, const Stroke& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

// Skeletons in a unit box, x to the right and y downward.
std::vector<Stroke> skeleton(int label) {
  switch (label) {
    case 0:
      return {arc({0.5, 0.5}, 0.30, 0.45, 0, 360, 40)};
    case 1:
      return {{{0.34, 0.22}, {0.52, 0.05}, {0.52, 0.95}}};
    case 2:
      return {concat(arc({0.5, 0.32}, 0.28, 0.27, -165, 25), Stroke{{0.18, 0.95}, {0.86, 0.95}})};
    case 3:
      return {concat(arc({0.5, 0.27}, 0.26, 0.22, -150, 90), arc({0.5, 0.72}, 0.29, 0.23, -90, 150))};
    case 4:
      return {{{0.66, 0.95}, {0.66, 0.05}, {0.14, 0.66}, {0.88, 0.66}}};
    case 5:
      return {concat(Stroke{{0.82, 0.05}, {0.32, 0.05}, {0.27, 0.44}}, arc({0.49, 0.66}, 0.30, 0.28, -130, 145))};
    case 6:
      return {concat(Stroke{{0.72, 0.05}, {0.46, 0.20}, {0.30, 0.42}}, arc({0.5, 0.70}, 0.26, 0.25, 200, 560, 32))};
    case 7:
      return {{{0.14, 0.05}, {0.86, 0.05}, {0.40, 0.95}}};
    case 8:
      return {arc({0.5, 0.27}, 0.22, 0.22, 0, 360, 32), arc({0.5, 0.72}, 0.27, 0.23, 0, 360, 32)};
    case 9:
      return {arc({0.5, 0.30}, 0.26, 0.25, 0, 360, 32), {{0.76, 0.30}, {0.62, 0.95}}};
    default:
      throw std::invalid_argument("digit label out of range: " + std::to_string(label));
  }
}

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw LoadError("truncated IDX header: " + path.string());
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

std::vector<std::size_t> DigitSource::indices_of(int label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) out.push_back(i);
  }
  return out;
}

DigitSource load_mnist_idx(const std::filesystem::path& images_file,
                           const std::filesystem::path& labels_file) {
  std::ifstream images(images_file, std::ios::binary);
  if (!images) throw LoadError("cannot open " + images_file.string());
  std::ifstream labels(labels_file, std::ios::binary);
  if (!labels) throw LoadError("cannot open " + labels_file.string());

  if (read_be32(images, images_file) != 2051) throw LoadError("bad IDX image magic: " + images_file.string());
  const auto count = read_be32(images, images_file);
  const auto rows = read_be32(images, images_file);
  const auto cols = read_be32(images, images_file);
  if (rows != kDigitSide || cols != kDigitSide) throw LoadError("expected 28x28 digits: " + images_file.string());
  if (read_be32(labels, labels_file) != 2049) throw LoadError("bad IDX label magic: " + labels_file.string());
  if (read_be32(labels, labels_file) != count) throw LoadError("image/label count mismatch: " + labels_file.string());

  DigitSource out;
  out.images.reserve(count);
  out.labels.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    auto img = torch::empty({kDigitSide, kDigitSide}, torch::kUInt8);
    if (!images.read(reinterpret_cast<char*>(img.data_ptr<std::uint8_t>()), kDigitSide * kDigitSide)) {
      throw LoadError("truncated IDX images: " + images_file.string());
    }
    char label = 0;
    if (!labels.get(label)) throw LoadError("truncated IDX labels: " + labels_file.string());
    if (label < 0 || label > 9) throw LoadError("label out of range in " + labels_file.string());
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
  return out;
}

torch::Tensor render_digit(int label, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  const double angle = 0.2 * u(rng);  // about +-11 degrees
  const double shear = 0.18 * u(rng);
  const double sx = 0.92 + 0.12 * u(rng);
  const double sy = 0.95 + 0.07 * u(rng);
  const double thickness = 2.2 + 0.6 * u(rng);
  const double ox = 1.2 * u(rng);
  const double oy = 1.2 * u(rng);
  const double jitter = 0.025;

  const double c = std::cos(angle), s = std::sin(angle);
  auto to_pixels = [&](Point p) {
    // unit box -> centered box of ~16 x 20 pixels
    const double x = (p.x - 0.5) * 16.0 * sx;
    const double y = (p.y - 0.5) * 20.0 * sy;
    const double xs = x + shear * y;
    return Point{13.5 + ox + c * xs - s * y, 13.5 + oy + s * xs + c * y};
  };

  std::vector<Stroke> strokes = skeleton(label);
  for (auto& stroke : strokes) {
    for (auto& p : stroke) {
      p.x += jitter * u(rng);
      p.y += jitter * u(rng);
      p = to_pixels(p);
    }
  }

  auto img = torch::zeros({kDigitSide, kDigitSide}, torch::kUInt8);
  auto acc = img.accessor<std::uint8_t, 2>();
  for (int y = 0; y < kDigitSide; ++y) {
    for (int x = 0; x < kDigitSide; ++x) {
      const Point p{x + 0.0, y + 0.0};
      double d = 1e9;
      for (const auto& stroke : strokes) {
        for (std::size_t i = 1; i < stroke.size(); ++i) d = std::min(d, segment_distance(p, stroke[i - 1], stroke[i]));
      }
      const double v = std::clamp(0.5 * thickness + 0.5 - d, 0.0, 1.0);
      acc[y][x] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  }
  return img;
}

DigitSource synthesize_digits(int per_class, std::uint64_t seed) {
  if (per_class <= 0) throw std::invalid_argument("per_class must be positive");
  std::mt19937_64 rng(seed);
  DigitSource out;
  out.images.reserve(static_cast<std::size_t>(per_class) * 10);
  for (int i = 0; i < per_class; ++i) {
    for (int label = 0; label < 10; ++label) {
      out.images.push_back(render_digit(label, rng()));
      out.labels.push_back(label);
    }
  }
  return out;
}

}  // namespace avid
