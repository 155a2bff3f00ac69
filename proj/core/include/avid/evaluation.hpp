#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <torch/types.h>

#include "avid/data.hpp"
#include "avid/detection.hpp"
#include "avid/models.hpp"

namespace avid {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double alpha = 0.0;
  double zeta = 0.0;
};

struct EvalCurve {
  std::vector<RocPoint> points;  // sorted by FPR, endpoints included
  double auc = 0.0;
  double eer = 0.0;
};

enum class EvalLevel { frame, pixel, region };

const char* to_string(EvalLevel level);
EvalLevel parse_level(const std::string& text);

/// A frame is irregular when at least one pixel is flagged.
bool frame_level_label(const IrregularityMask& mask);
bool frame_level_label(const torch::Tensor& mask);

/// |mask & gt| / |gt| >= 0.40. False when gt is empty.
inline constexpr double kPixelOverlap = 0.40;
bool pixel_level_match(const torch::Tensor& mask, const torch::Tensor& gt);

/// Sorts by (FPR, TPR), adds (0,0) and (1,1) when missing, and validates.
/// Throws std::invalid_argument on NaN or out-of-range coordinates.
std::vector<RocPoint> normalize_curve(std::vector<RocPoint> points);

/// Trapezoidal area under the normalized curve.
double auc_of(std::vector<RocPoint> points);
/// FPR where the normalized curve crosses TPR = 1 - FPR, linearly interpolated.
double eer_of(std::vector<RocPoint> points);

/// Non-dominated points (no other point has lower-or-equal FPR and
/// higher-or-equal TPR), sorted by FPR.
std::vector<RocPoint> upper_envelope(std::vector<RocPoint> points);

/// Threshold pairs visited when building a curve: a coupled path
/// (zeta = q, alpha = (1 - q) * alpha_max) and a grid over both thresholds.
struct SweepConfig {
  int coupled_points = 101;
  int grid_side = 21;
  double alpha_max = 1.0;

  std::vector<Thresholds> thresholds() const;

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

/// Network outputs for one scored frame plus its ground truth, reduced to
/// what the sweep needs.
struct FrameEvidence {
  torch::Tensor residual;      // H x W float
  ScoreGrid scores;
  std::optional<bool> irregular;
  torch::Tensor gt_mask;       // H x W bool or undefined
  std::vector<TileLabel> tiles;
};

std::vector<FrameEvidence> collect_evidence(const InputSet& inputs, Inpainter& inpainter,
                                            Detector& detector, int batch_size = 16);

/// Curve for one protocol. frame: flagged frames vs frame labels. pixel:
/// a positive frame counts when pixel_level_match holds, false positives are
/// flagged normal frames. region: a block is flagged when its score is
/// <= zeta and it holds a residual >= alpha, against per-tile labels.
/// Throws std::invalid_argument when the level's ground truth is missing.
EvalCurve roc(std::span<const FrameEvidence> evidence, const RegionGrid& grid,
              const SweepConfig& sweep, EvalLevel level);

EvalCurve roc(const InputSet& inputs, Inpainter& inpainter, Detector& detector,
              const SweepConfig& sweep, EvalLevel level);

/// Curve from a scalar score per item (higher = more irregular), one point
/// per distinct threshold.
EvalCurve roc_from_scores(std::span<const double> scores, std::span<const bool> positive);

}  // namespace avid
