#include "avid/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <torch/torch.h>

#include "avid/image_io.hpp"

namespace avid {
namespace {

using Rgb = std::array<std::uint8_t, 3>;

class Canvas {
 public:
  explicit Canvas(int side) : side_(side), pixels_(torch::full({3, side, side}, 255, torch::kUInt8)) {}

  void dot(int x, int y, Rgb c, int radius) {
    auto a = pixels_.accessor<std::uint8_t, 3>();
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        const int px = x + dx, py = y + dy;
        if (px < 0 || py < 0 || px >= side_ || py >= side_) continue;
        for (int ch = 0; ch < 3; ++ch) a[ch][py][px] = c[static_cast<std::size_t>(ch)];
      }
    }
  }

  void line(double x0, double y0, double x1, double y1, Rgb c, int radius = 0) {
    const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))));
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      dot(static_cast<int>(std::lround(x0 + t * (x1 - x0))), static_cast<int>(std::lround(y0 + t * (y1 - y0))), c, radius);
    }
  }

  const torch::Tensor& pixels() const { return pixels_; }

 private:
  int side_;
  torch::Tensor pixels_;
};

}  // namespace

void render_roc_png(const EvalCurve& curve, const std::filesystem::path& path, int side) {
  side = std::max(side, 64);
  Canvas canvas(side);
  const double margin = side * 0.08;
  const double span = side - 2 * margin;
  auto px = [&](double fpr) { return margin + fpr * span; };
  auto py = [&](double tpr) { return side - margin - tpr * span; };

  const Rgb grid{225, 225, 225}, axis{0, 0, 0}, chance{150, 150, 150}, roc{30, 90, 200}, eer{200, 40, 40};
  for (int k = 1; k < 10; ++k) {
    canvas.line(px(k / 10.0), py(0), px(k / 10.0), py(1), grid);
    canvas.line(px(0), py(k / 10.0), px(1), py(k / 10.0), grid);
  }
  canvas.line(px(0), py(0), px(1), py(1), chance);
  canvas.line(px(0), py(0), px(1), py(0), axis, 1);
  canvas.line(px(0), py(0), px(0), py(1), axis, 1);
  canvas.line(px(0), py(1), px(1), py(1), axis);
  canvas.line(px(1), py(0), px(1), py(1), axis);
  // EER line, TPR = 1 - FPR
  canvas.line(px(0), py(1), px(1), py(0), grid);

  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    canvas.line(px(a.fpr), py(a.tpr), px(b.fpr), py(b.tpr), roc, 1);
  }
  canvas.dot(static_cast<int>(px(curve.eer)), static_cast<int>(py(1.0 - curve.eer)), eer, 3);

  write_png_rgb(path, canvas.pixels());
}

}  // namespace avid
