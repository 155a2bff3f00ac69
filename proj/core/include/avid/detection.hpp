#pragma once

#include <torch/types.h>

#include "avid/data.hpp"
#include "avid/models.hpp"

namespace avid {

struct Thresholds {
  double alpha = 0.5;  // pixel residual threshold
  double zeta = 0.5;   // region score threshold

  void validate() const;

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct IrregularityMask {
  torch::Tensor pixels;  // H x W bool
  Thresholds provenance;

  bool any() const;
  std::int64_t count() const;
};

/// Per-pixel mean over channels of |x - x'|, H x W float.
torch::Tensor residual_map(const ModelInput& x, const ModelInput& x_prime);

/// residual_map(x, x') >= alpha.
torch::Tensor residual_mask(const ModelInput& x, const ModelInput& x_prime, double alpha);
torch::Tensor residual_mask(const torch::Tensor& residual, double alpha);

/// Every pixel of each block whose score is <= zeta.
torch::Tensor region_irregularity_mask(const ScoreGrid& scores, const RegionGrid& grid, double zeta);

/// Score grid expanded to pixel resolution (nearest, one value per block).
torch::Tensor upsample_scores(const ScoreGrid& scores, const RegionGrid& grid);

struct FusionResult {
  IrregularityMask mask;
  torch::Tensor residual_mask;
  torch::Tensor region_mask;
  torch::Tensor residual;  // H x W float
  ScoreGrid scores;
  ModelInput inpainted;
};

/// Intersection of the two masks given precomputed evidence.
FusionResult fuse(const torch::Tensor& residual, const ScoreGrid& scores, const RegionGrid& grid,
                  const Thresholds& thresholds);

/// Runs both networks on the clean input and fuses their evidence.
FusionResult fuse(const ModelInput& x, Inpainter& inpainter, Detector& detector,
                  const Thresholds& thresholds);

/// max over pixels of min(residual(p), 1 - score(block(p))); in [0,1].
/// A frame is flagged at (alpha = s, zeta = 1 - s) exactly when its score is >= s.
double frame_score(const torch::Tensor& residual, const ScoreGrid& scores, const RegionGrid& grid);
double frame_score(const ModelInput& x, Inpainter& inpainter, Detector& detector);

}  // namespace avid
