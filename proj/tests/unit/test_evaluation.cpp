#include <gtest/gtest.h>
#include <torch/torch.h>

#include <algorithm>
#include <random>

#include "avid/detection.hpp"
#include "avid/errors.hpp"
#include "avid/evaluation.hpp"
#include "avid/models.hpp"
#include "oracles.hpp"

namespace avid {
namespace {

std::vector<RocPoint> pts(std::initializer_list<std::pair<double, double>> xy) {
  std::vector<RocPoint> out;
  for (auto [f, t] : xy) out.push_back({f, t});
  return out;
}

TEST(FrameLabel, AtLeastOnePixel) {
  auto m = torch::zeros({10, 10}, torch::kBool);
  EXPECT_FALSE(frame_level_label(m));
  m[3][4] = true;
  EXPECT_TRUE(frame_level_label(m));
  EXPECT_TRUE(frame_level_label(torch::ones({10, 10}, torch::kBool)));
  EXPECT_TRUE(frame_level_label(IrregularityMask{m, {}}));
}

TEST(PixelMatch, Fixtures) {
  auto gt = torch::zeros({10, 10}, torch::kBool);
  gt.slice(0, 0, 2).fill_(true);  // 20 pixels
  EXPECT_TRUE(pixel_level_match(gt.clone(), gt));
  auto m = torch::zeros({10, 10}, torch::kBool);
  m[0].slice(0, 0, 8).fill_(true);  // exactly 8 / 20 = 40%
  EXPECT_TRUE(pixel_level_match(m, gt));
  m[0][7] = false;  // 35%
  EXPECT_FALSE(pixel_level_match(m, gt));
  EXPECT_FALSE(pixel_level_match(~gt, gt));
  EXPECT_FALSE(pixel_level_match(torch::ones({10, 10}, torch::kBool), torch::zeros({10, 10}, torch::kBool)));
  EXPECT_THROW(pixel_level_match(m, torch::zeros({10, 9}, torch::kBool)), std::invalid_argument);
}

TEST(PixelMatch, MonotoneInMask) {
  torch::manual_seed(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto gt = torch::rand({12, 12}) < 0.3;
    auto m = torch::rand({12, 12}) < 0.2;
    bool was = pixel_level_match(m, gt);
    for (int k = 0; k < 10; ++k) {
      m = m | (torch::rand({12, 12}) < 0.05);
      const bool now = pixel_level_match(m, gt);
      ASSERT_TRUE(!was || now);
      was = now;
    }
  }
}

TEST(Curve, DiagonalAndPerfect) {
  EXPECT_DOUBLE_EQ(auc_of(pts({{0, 0}, {1, 1}})), 0.5);
  EXPECT_DOUBLE_EQ(eer_of(pts({{0, 0}, {1, 1}})), 0.5);
  EXPECT_DOUBLE_EQ(auc_of(pts({{0, 0}, {0, 1}, {1, 1}})), 1.0);
  EXPECT_DOUBLE_EQ(eer_of(pts({{0, 0}, {0, 1}, {1, 1}})), 0.0);
}

TEST(Curve, EndpointsAreAddedAndNaNRejected) {
  const auto c = normalize_curve(pts({{0.5, 0.7}}));
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.front().fpr, 0.0);
  EXPECT_EQ(c.back().tpr, 1.0);
  EXPECT_THROW(auc_of(pts({{std::nan(""), 0.5}})), std::invalid_argument);
  EXPECT_THROW(eer_of(pts({{0.2, 1.5}})), std::invalid_argument);
}

TEST(Curve, RandomTenPointCurvesMatchDenseResampling) {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> f(10), t(10);
    for (auto& v : f) v = u(rng);
    for (auto& v : t) v = u(rng);
    std::sort(f.begin(), f.end());
    std::sort(t.begin(), t.end());
    std::vector<RocPoint> p;
    for (int i = 0; i < 10; ++i) p.push_back({f[i], t[i]});
    const auto c = normalize_curve(p);

    const int n = 200000;
    double area = 0;
    for (int i = 0; i < n; ++i) area += test::curve_at(c, (i + 0.5) / n);
    area /= n;
    EXPECT_NEAR(auc_of(p), area, 1e-5);

    EXPECT_NEAR(eer_of(p), test::bisect_eer(c), 1e-6);
  }
}

TEST(Envelope, KeepsNonDominatedPoints) {
  const auto e = upper_envelope(pts({{0.1, 0.5}, {0.2, 0.4}, {0.3, 0.9}, {0.3, 0.8}, {0.5, 0.9}}));
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0].fpr, 0.1);
  EXPECT_EQ(e[1].tpr, 0.9);
  EXPECT_EQ(e[1].fpr, 0.3);
}

TEST(RocFromScores, SixPointHandBuiltList) {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6, 0.55, 0.1};
  const bool labels[] = {true, false, true, true, false, false};
  const std::vector<bool> p(std::begin(labels), std::end(labels));
  const auto c = roc_from_scores(s, labels);
  EXPECT_NEAR(c.auc, test::mann_whitney(s, p), 1e-12);
  EXPECT_NEAR(c.auc, 7.0 / 9.0, 1e-12);
  EXPECT_NEAR(c.eer, test::brute_eer(s, p), 1e-9);
}

TEST(RocFromScores, RandomSetsMatchOracles) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 60);
    std::vector<double> s(n);
    std::vector<bool> p(n);
    for (int i = 0; i < n; ++i) {
      p[i] = u(rng) < 0.4;
      // coarse values so ties happen
      s[i] = std::round((u(rng) + (p[i] ? 0.3 : 0.0)) * 20) / 20;
    }
    p[0] = true;
    p[1] = false;
    std::unique_ptr<bool[]> pb(new bool[n]);
    for (int i = 0; i < n; ++i) pb[i] = p[i];
    const auto c = roc_from_scores(s, std::span<const bool>(pb.get(), n));
    ASSERT_NEAR(c.auc, test::mann_whitney(s, p), 1e-6);
    ASSERT_NEAR(c.eer, test::brute_eer(s, p), 1e-6);
    ASSERT_GE(c.auc, 0.0);
    ASSERT_LE(c.auc, 1.0);

    std::vector<double> neg(s);
    for (auto& v : neg) v = -v;
    ASSERT_NEAR(roc_from_scores(neg, std::span<const bool>(pb.get(), n)).auc, 1.0 - c.auc, 1e-9);
  }
}

TEST(RocFromScores, NeedsBothClasses) {
  const std::vector<double> s{0.1, 0.2};
  const bool p[] = {true, true};
  EXPECT_THROW(roc_from_scores(s, p), std::invalid_argument);
}

TEST(Sweep, ThresholdCountAndRanges) {
  const SweepConfig sweep;
  const auto th = sweep.thresholds();
  EXPECT_EQ(th.size(), 542u);
  for (const auto& t : th) EXPECT_NO_THROW(t.validate());
}

class RocEvidence : public ::testing::Test {
 protected:
  RegionGrid grid = region_map(DetectorSpec::defaults(), 56, 56);

  FrameEvidence frame(bool irregular, int seed) const {
    torch::manual_seed(seed);
    FrameEvidence e;
    e.residual = torch::rand({56, 56}) * 0.05;
    e.scores = ScoreGrid{0.9 + 0.1 * torch::rand({2, 2})};
    e.irregular = irregular;
    e.gt_mask = torch::zeros({56, 56}, torch::kBool);
    e.tiles = {{0, 0, false}, {0, 1, false}, {1, 0, false}, {1, 1, false}};
    if (irregular) {
      e.residual.slice(0, 30, 50).slice(1, 5, 25).fill_(0.9);
      e.scores.values[1][0] = 0.05;
      e.gt_mask.slice(0, 30, 50).slice(1, 5, 25).fill_(true);
      e.tiles[2].irregular = true;
    }
    return e;
  }
};

TEST_F(RocEvidence, DegenerateScorerGivesDiagonal) {
  std::vector<FrameEvidence> ev;
  for (int i = 0; i < 6; ++i) {
    auto e = frame(false, 1);  // identical evidence
    e.irregular = i % 2 == 0;
    ev.push_back(e);
  }
  const auto c = roc(ev, grid, SweepConfig{}, EvalLevel::frame);
  EXPECT_NEAR(c.auc, 0.5, 1e-12);
  EXPECT_NEAR(c.eer, 0.5, 1e-12);
}

TEST_F(RocEvidence, PerfectSeparationAtEveryLevel) {
  std::vector<FrameEvidence> ev;
  for (int i = 0; i < 4; ++i) ev.push_back(frame(i < 2, 10 + i));
  for (auto level : {EvalLevel::frame, EvalLevel::pixel, EvalLevel::region}) {
    const auto c = roc(ev, grid, SweepConfig{}, level);
    EXPECT_DOUBLE_EQ(c.auc, 1.0) << to_string(level);
    EXPECT_DOUBLE_EQ(c.eer, 0.0) << to_string(level);
    EXPECT_EQ(c.points.front().fpr, 0.0);
    EXPECT_EQ(c.points.back().tpr, 1.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) EXPECT_LE(c.points[i - 1].fpr, c.points[i].fpr);
  }
}

TEST_F(RocEvidence, InvariantToSampleOrder) {
  std::vector<FrameEvidence> ev;
  torch::manual_seed(4);
  for (int i = 0; i < 12; ++i) {
    auto e = frame(i % 3 == 0, 100 + i);
    e.residual = torch::rand({56, 56});  // make it imperfect
    e.scores = ScoreGrid{torch::rand({2, 2})};
    ev.push_back(e);
  }
  for (auto level : {EvalLevel::frame, EvalLevel::pixel, EvalLevel::region}) {
    const auto a = roc(ev, grid, SweepConfig{}, level);
    auto shuffled = ev;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(1));
    const auto b = roc(shuffled, grid, SweepConfig{}, level);
    EXPECT_EQ(a.auc, b.auc);
    EXPECT_EQ(a.eer, b.eer);
    ASSERT_EQ(a.points.size(), b.points.size());
  }
}

TEST_F(RocEvidence, PixelLevelNeedsFortyPercentOverlap) {
  // Positive frames flag only a corner of the ground truth: detected at frame
  // level, missed at pixel level.
  std::vector<FrameEvidence> ev;
  for (int i = 0; i < 4; ++i) {
    auto e = frame(i < 2, 20 + i);
    if (i < 2) {
      e.residual.slice(0, 30, 50).slice(1, 5, 25).fill_(0.0);
      e.residual.slice(0, 30, 34).slice(1, 5, 25).fill_(0.9);  // 20% of gt
    } else {
      e.scores.values[1][0] = 0.05;  // same region cell, low residual everywhere
    }
    ev.push_back(e);
  }
  EXPECT_DOUBLE_EQ(roc(ev, grid, SweepConfig{}, EvalLevel::frame).auc, 1.0);
  EXPECT_LT(roc(ev, grid, SweepConfig{}, EvalLevel::pixel).auc, 1.0);
}

TEST_F(RocEvidence, MissingGroundTruthThrows) {
  std::vector<FrameEvidence> ev{frame(true, 1), frame(false, 2)};
  for (auto& e : ev) e.tiles.clear();
  EXPECT_THROW(roc(ev, grid, SweepConfig{}, EvalLevel::region), std::invalid_argument);
  ev = {frame(true, 1), frame(false, 2)};
  for (auto& e : ev) e.gt_mask = torch::Tensor();
  EXPECT_THROW(roc(ev, grid, SweepConfig{}, EvalLevel::pixel), std::invalid_argument);
  ev = {frame(true, 1), frame(true, 2)};
  EXPECT_THROW(roc(ev, grid, SweepConfig{}, EvalLevel::frame), std::invalid_argument);
}

TEST_F(RocEvidence, FrameCurveMatchesBruteForceOverSweep) {
  std::vector<FrameEvidence> ev;
  torch::manual_seed(6);
  for (int i = 0; i < 10; ++i) {
    auto e = frame(i % 2 == 0, 200 + i);
    e.residual = torch::rand({56, 56}) * (i % 2 == 0 ? 1.0 : 0.7);
    e.scores = ScoreGrid{torch::rand({2, 2})};
    ev.push_back(e);
  }
  const SweepConfig sweep{11, 5, 1.0};
  std::vector<RocPoint> raw;
  for (const auto& th : sweep.thresholds()) {
    double tp = 0, fp = 0;
    for (const auto& e : ev) {
      if (fuse(e.residual, e.scores, grid, th).mask.any()) (*e.irregular ? tp : fp) += 1;
    }
    raw.push_back({fp / 5, tp / 5, th.alpha, th.zeta});
  }
  const auto expect = normalize_curve(upper_envelope(raw));
  const auto c = roc(ev, grid, sweep, EvalLevel::frame);
  EXPECT_NEAR(c.auc, auc_of(expect), 1e-12);
  EXPECT_NEAR(c.eer, eer_of(expect), 1e-12);
}

TEST(Levels, ParseAndPrint) {
  for (auto l : {EvalLevel::frame, EvalLevel::pixel, EvalLevel::region}) EXPECT_EQ(parse_level(to_string(l)), l);
  EXPECT_THROW(parse_level("tile"), std::exception);
}

}  // namespace
}  // namespace avid
