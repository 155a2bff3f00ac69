#include "avid/detection.hpp"

#include <algorithm>
#include <cmath>

#include <torch/torch.h>

#include "avid/errors.hpp"

namespace avid {
namespace {

void check_grid(const ScoreGrid& scores, const RegionGrid& grid) {
  if (!scores.values.defined() || scores.values.dim() != 2 || scores.rows() != grid.rows || scores.cols() != grid.cols) {
    throw std::invalid_argument("score grid does not match the region grid");
  }
}

torch::Tensor expand_blocks(const torch::Tensor& cells, const RegionGrid& grid) {
  return cells.repeat_interleave(grid.block_height(), 0).repeat_interleave(grid.block_width(), 1);
}

}  // namespace

void Thresholds::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be >= 0");
  if (!(zeta > 0.0 && zeta < 1.0)) throw ConfigError("zeta must be in (0,1)");
}

bool IrregularityMask::any() const { return pixels.defined() && pixels.any().item<bool>(); }

std::int64_t IrregularityMask::count() const { return pixels.defined() ? pixels.sum().item<std::int64_t>() : 0; }

torch::Tensor residual_map(const ModelInput& x, const ModelInput& x_prime) {
  if (!x.channels.defined() || !x_prime.channels.defined() || x.channels.sizes() != x_prime.channels.sizes() ||
      x.channels.dim() != 3 || x.channels.size(0) != 3) {
    throw std::invalid_argument("residual_map needs two inputs of the same 3 x H x W shape");
  }
  return (x.channels - x_prime.channels).abs().mean(0);
}

torch::Tensor residual_mask(const torch::Tensor& residual, double alpha) { return residual.ge(alpha); }

torch::Tensor residual_mask(const ModelInput& x, const ModelInput& x_prime, double alpha) {
  return residual_mask(residual_map(x, x_prime), alpha);
}

torch::Tensor region_irregularity_mask(const ScoreGrid& scores, const RegionGrid& grid, double zeta) {
  check_grid(scores, grid);
  return expand_blocks(scores.values.le(zeta), grid);
}

torch::Tensor upsample_scores(const ScoreGrid& scores, const RegionGrid& grid) {
  check_grid(scores, grid);
  return expand_blocks(scores.values, grid);
}

FusionResult fuse(const torch::Tensor& residual, const ScoreGrid& scores, const RegionGrid& grid,
                  const Thresholds& thresholds) {
  if (!residual.defined() || residual.dim() != 2 || residual.size(0) != grid.frame_height ||
      residual.size(1) != grid.frame_width) {
    throw std::invalid_argument("residual map does not match the region grid's frame size");
  }
  FusionResult r;
  r.residual = residual;
  r.scores = scores;
  r.residual_mask = residual_mask(residual, thresholds.alpha);
  r.region_mask = region_irregularity_mask(scores, grid, thresholds.zeta);
  r.mask = {r.residual_mask.logical_and(r.region_mask), thresholds};
  return r;
}

FusionResult fuse(const ModelInput& x, Inpainter& inpainter, Detector& detector, const Thresholds& thresholds) {
  thresholds.validate();
  torch::NoGradGuard no_grad;
  auto inpainted = inpainter_forward(inpainter, x);
  auto scores = detector_forward(detector, x);
  const auto grid = region_map(detector->spec(), x.height(), x.width());
  auto r = fuse(residual_map(x, inpainted), scores, grid, thresholds);
  r.inpainted = std::move(inpainted);
  return r;
}

double frame_score(const torch::Tensor& residual, const ScoreGrid& scores, const RegionGrid& grid) {
  check_grid(scores, grid);
  if (residual.size(0) != grid.frame_height || residual.size(1) != grid.frame_width) {
    throw std::invalid_argument("residual map does not match the region grid's frame size");
  }
  const auto block_max = residual.to(torch::kFloat64)
                             .reshape({grid.rows, grid.block_height(), grid.cols, grid.block_width()})
                             .amax({1, 3});
  const auto evidence = torch::minimum(block_max, 1.0 - scores.values.to(torch::kFloat64));
  return std::clamp(evidence.max().item<double>(), 0.0, 1.0);
}

double frame_score(const ModelInput& x, Inpainter& inpainter, Detector& detector) {
  torch::NoGradGuard no_grad;
  const auto inpainted = inpainter_forward(inpainter, x);
  const auto scores = detector_forward(detector, x);
  return frame_score(residual_map(x, inpainted), scores, region_map(detector->spec(), x.height(), x.width()));
}

}  // namespace avid
