#include "avid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <torch/torch.h>

#include "avid/errors.hpp"

namespace avid {
namespace {

/// Per-frame values the sweep touches, in plain arrays.
struct FrameSummary {
  std::vector<double> block_max;  // max residual per block
  std::vector<double> scores;     // score per block
  bool positive = false;
  // pixel level: residuals at ground-truth pixels, sorted, per block
  std::vector<std::vector<double>> gt_residuals;
  std::int64_t gt_count = 0;
};

std::vector<double> to_vector(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat64).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

std::size_t count_at_least(const std::vector<double>& sorted, double alpha) {
  return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), alpha));
}

bool any_block_flagged(const FrameSummary& f, const Thresholds& th) {
  for (std::size_t b = 0; b < f.scores.size(); ++b) {
    if (f.scores[b] <= th.zeta && f.block_max[b] >= th.alpha) return true;
  }
  return false;
}

double rate(std::int64_t hits, std::int64_t total) { return static_cast<double>(hits) / static_cast<double>(total); }

}  // namespace

const char* to_string(EvalLevel level) {
  switch (level) {
    case EvalLevel::frame: return "frame";
    case EvalLevel::pixel: return "pixel";
    case EvalLevel::region: return "region";
  }
  return "frame";
}

EvalLevel parse_level(const std::string& text) {
  if (text == "frame") return EvalLevel::frame;
  if (text == "pixel") return EvalLevel::pixel;
  if (text == "region") return EvalLevel::region;
  throw ConfigError("unknown evaluation level '" + text + "' (expected frame, pixel or region)");
}

bool frame_level_label(const torch::Tensor& mask) { return mask.defined() && mask.any().item<bool>(); }

bool frame_level_label(const IrregularityMask& mask) { return frame_level_label(mask.pixels); }

bool pixel_level_match(const torch::Tensor& mask, const torch::Tensor& gt) {
  if (!mask.defined() || !gt.defined() || mask.sizes() != gt.sizes()) {
    throw std::invalid_argument("mask and ground truth must have the same shape");
  }
  const auto gt_count = gt.to(torch::kBool).sum().item<std::int64_t>();
  if (gt_count == 0) return false;
  const auto overlap = mask.to(torch::kBool).logical_and(gt.to(torch::kBool)).sum().item<std::int64_t>();
  return 10 * overlap >= 4 * gt_count;  // overlap / |gt| >= 0.40, exactly
}

std::vector<RocPoint> normalize_curve(std::vector<RocPoint> points) {
  for (const auto& p : points) {
    if (!std::isfinite(p.fpr) || !std::isfinite(p.tpr) || p.fpr < 0.0 || p.fpr > 1.0 || p.tpr < 0.0 || p.tpr > 1.0) {
      throw std::invalid_argument("ROC points must have finite coordinates in [0,1]");
    }
  }
  const bool has_origin = std::any_of(points.begin(), points.end(), [](const RocPoint& p) { return p.fpr == 0.0 && p.tpr == 0.0; });
  const bool has_corner = std::any_of(points.begin(), points.end(), [](const RocPoint& p) { return p.fpr == 1.0 && p.tpr == 1.0; });
  if (!has_origin) points.push_back({0.0, 0.0, 0.0, 0.0});
  if (!has_corner) points.push_back({1.0, 1.0, 0.0, 1.0});
  std::stable_sort(points.begin(), points.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
  });
  return points;
}

double auc_of(std::vector<RocPoint> points) {
  points = normalize_curve(std::move(points));
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  }
  return std::clamp(area, 0.0, 1.0);
}

double eer_of(std::vector<RocPoint> points) {
  points = normalize_curve(std::move(points));
  // f = miss rate - false positive rate; +1 at (0,0), -1 at (1,1).
  auto f = [](const RocPoint& p) { return (1.0 - p.tpr) - p.fpr; };
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double f0 = f(points[i - 1]), f1 = f(points[i]);
    if (f0 > 0.0 && f1 <= 0.0) {
      const double t = f0 / (f0 - f1);
      return points[i - 1].fpr + t * (points[i].fpr - points[i - 1].fpr);
    }
  }
  return 0.5;  // unreachable for a normalized curve
}

std::vector<RocPoint> upper_envelope(std::vector<RocPoint> points) {
  std::stable_sort(points.begin(), points.end(), [](const RocPoint& a, const RocPoint& b) {
    return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr > b.tpr);
  });
  std::vector<RocPoint> out;
  double best = -1.0;
  for (const auto& p : points) {
    if (p.tpr > best) {
      out.push_back(p);
      best = p.tpr;
    }
  }
  return out;
}

std::vector<Thresholds> SweepConfig::thresholds() const {
  if (coupled_points < 0 || grid_side < 0 || coupled_points + grid_side == 0) {
    throw ConfigError("sweep needs coupled_points >= 0, grid_side >= 0, and at least one of them positive");
  }
  if (!(alpha_max > 0.0)) throw ConfigError("alpha_max must be > 0");
  std::vector<Thresholds> out;
  out.reserve(static_cast<std::size_t>(coupled_points + grid_side * grid_side));
  for (int k = 1; k <= coupled_points; ++k) {
    const double q = static_cast<double>(k) / (coupled_points + 1);
    out.push_back({(1.0 - q) * alpha_max, q});
  }
  for (int i = 0; i < grid_side; ++i) {
    const double alpha = grid_side == 1 ? 0.5 * alpha_max : alpha_max * i / (grid_side - 1);
    for (int j = 0; j < grid_side; ++j) out.push_back({alpha, (j + 0.5) / grid_side});
  }
  return out;
}

std::vector<FrameEvidence> collect_evidence(const InputSet& inputs, Inpainter& inpainter, Detector& detector,
                                            int batch_size) {
  torch::NoGradGuard no_grad;
  std::vector<FrameEvidence> out;
  out.reserve(inputs.size());
  const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < inputs.size(); start += bs) {
    std::vector<std::size_t> idx(std::min(bs, inputs.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto x = inputs.batch(idx);
    const auto residual = (x - inpainter->forward(x)).abs().mean(1);
    const auto scores = detector->forward(x);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& s = inputs.sample(idx[k]);
      out.push_back({residual[static_cast<std::int64_t>(k)].contiguous(), ScoreGrid{scores[static_cast<std::int64_t>(k)].contiguous()},
                     s.irregular, inputs.mask(idx[k]), s.tiles});
    }
  }
  return out;
}

EvalCurve roc(std::span<const FrameEvidence> evidence, const RegionGrid& grid, const SweepConfig& sweep,
              EvalLevel level) {
  if (evidence.empty()) throw std::invalid_argument("no frames to evaluate");
  const auto nblocks = static_cast<std::size_t>(grid.rows * grid.cols);

  std::vector<FrameSummary> frames;
  frames.reserve(evidence.size());
  for (const auto& e : evidence) {
    if (e.scores.rows() != grid.rows || e.scores.cols() != grid.cols || e.residual.size(0) != grid.frame_height ||
        e.residual.size(1) != grid.frame_width) {
      throw std::invalid_argument("frame evidence does not match the region grid");
    }
    FrameSummary f;
    const auto blocks = e.residual.to(torch::kFloat64).reshape({grid.rows, grid.block_height(), grid.cols, grid.block_width()});
    f.block_max = to_vector(blocks.amax({1, 3}));
    f.scores = to_vector(e.scores.values);

    if (level == EvalLevel::region) {
      if (e.tiles.size() != nblocks) {
        throw std::invalid_argument("region evaluation needs one tile label per detector cell");
      }
    } else if (e.irregular.has_value()) {
      f.positive = *e.irregular;
    } else if (e.gt_mask.defined()) {
      f.positive = e.gt_mask.any().item<bool>();
    } else {
      throw std::invalid_argument("frame has no ground truth label");
    }

    if (level == EvalLevel::pixel && f.positive) {
      if (!e.gt_mask.defined()) throw std::invalid_argument("pixel evaluation needs ground-truth masks");
      const auto gt = e.gt_mask.to(torch::kBool);
      f.gt_count = gt.sum().item<std::int64_t>();
      f.gt_residuals.resize(nblocks);
      const auto res = e.residual.to(torch::kFloat64).contiguous();
      const auto g = gt.contiguous();
      const auto* rp = res.data_ptr<double>();
      const auto* gp = g.data_ptr<bool>();
      for (std::int64_t y = 0; y < grid.frame_height; ++y) {
        for (std::int64_t x = 0; x < grid.frame_width; ++x) {
          const auto p = y * grid.frame_width + x;
          if (gp[p]) f.gt_residuals[static_cast<std::size_t>(grid.block_of(y, x))].push_back(rp[p]);
        }
      }
      for (auto& v : f.gt_residuals) std::sort(v.begin(), v.end());
    }
    frames.push_back(std::move(f));
  }

  std::int64_t positives = 0, negatives = 0;
  if (level == EvalLevel::region) {
    for (const auto& e : evidence) {
      for (const auto& t : e.tiles) (t.irregular ? positives : negatives) += 1;
    }
  } else {
    for (const auto& f : frames) (f.positive ? positives : negatives) += 1;
  }
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("ground truth needs at least one positive and one negative");
  }

  std::vector<RocPoint> points;
  for (const auto& th : sweep.thresholds()) {
    std::int64_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& f = frames[i];
      switch (level) {
        case EvalLevel::frame:
          if (any_block_flagged(f, th)) (f.positive ? tp : fp) += 1;
          break;
        case EvalLevel::pixel:
          if (f.positive) {
            std::int64_t overlap = 0;
            for (std::size_t b = 0; b < nblocks; ++b) {
              if (f.scores[b] <= th.zeta) overlap += static_cast<std::int64_t>(count_at_least(f.gt_residuals[b], th.alpha));
            }
            if (f.gt_count > 0 && 10 * overlap >= 4 * f.gt_count) ++tp;
          } else if (any_block_flagged(f, th)) {
            ++fp;
          }
          break;
        case EvalLevel::region: {
          const auto& tiles = evidence[i].tiles;
          for (const auto& t : tiles) {
            const auto b = static_cast<std::size_t>(t.row * grid.cols + t.col);
            if (f.scores[b] <= th.zeta && f.block_max[b] >= th.alpha) (t.irregular ? tp : fp) += 1;
          }
          break;
        }
      }
    }
    points.push_back({rate(fp, negatives), rate(tp, positives), th.alpha, th.zeta});
  }

  EvalCurve curve;
  curve.points = normalize_curve(upper_envelope(std::move(points)));
  curve.auc = auc_of(curve.points);
  curve.eer = eer_of(curve.points);
  return curve;
}

EvalCurve roc(const InputSet& inputs, Inpainter& inpainter, Detector& detector, const SweepConfig& sweep,
              EvalLevel level) {
  const auto grid = region_map(detector->spec(), inputs.height(), inputs.width());
  const auto evidence = collect_evidence(inputs, inpainter, detector);
  return roc(evidence, grid, sweep, level);
}

EvalCurve roc_from_scores(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size() || scores.empty()) throw std::invalid_argument("need one label per score");
  std::int64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw std::invalid_argument("scores must be finite");
    (positive[i] ? pos : neg) += 1;
  }
  if (pos == 0 || neg == 0) throw std::invalid_argument("need at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<RocPoint> points{{0.0, 0.0, 0.0, 0.0}};
  std::int64_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (positive[order[k]] ? tp : fp) += 1;
    const bool last_of_tie = k + 1 == order.size() || scores[order[k + 1]] != scores[order[k]];
    if (last_of_tie) points.push_back({rate(fp, neg), rate(tp, pos), scores[order[k]], 0.0});
  }
  EvalCurve curve;
  curve.points = normalize_curve(std::move(points));
  curve.auc = auc_of(curve.points);
  curve.eer = eer_of(curve.points);
  return curve;
}

}  // namespace avid
