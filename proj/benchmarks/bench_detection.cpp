#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include <random>

#include "avid/detection.hpp"
#include "avid/evaluation.hpp"

namespace {

void FuseEvidence(benchmark::State& state) {
  const auto grid = avid::region_map(avid::DetectorSpec::defaults(), 308, 308);
  const auto residual = torch::rand({308, 308});
  const avid::ScoreGrid scores{torch::rand({11, 11})};
  for (auto _ : state) benchmark::DoNotOptimize(avid::fuse(residual, scores, grid, {0.5, 0.5}));
}
BENCHMARK(FuseEvidence)->Unit(benchmark::kMicrosecond);

void FrameScore(benchmark::State& state) {
  const auto grid = avid::region_map(avid::DetectorSpec::defaults(), 308, 308);
  const auto residual = torch::rand({308, 308});
  const avid::ScoreGrid scores{torch::rand({11, 11})};
  for (auto _ : state) benchmark::DoNotOptimize(avid::frame_score(residual, scores, grid));
}
BENCHMARK(FrameScore)->Unit(benchmark::kMicrosecond);

std::vector<avid::FrameEvidence> random_evidence(int frames, std::int64_t side, std::int64_t cells) {
  std::mt19937 rng(3);
  std::vector<avid::FrameEvidence> out;
  for (int f = 0; f < frames; ++f) {
    avid::FrameEvidence e;
    e.residual = torch::rand({side, side});
    e.scores = {torch::rand({cells, cells})};
    e.gt_mask = torch::rand({side, side}) > 0.9;
    e.irregular = rng() % 2 == 0;
    for (int r = 0; r < cells; ++r) {
      for (int c = 0; c < cells; ++c) e.tiles.push_back({r, c, rng() % 10 == 0});
    }
    out.push_back(std::move(e));
  }
  return out;
}

void RocSweep(benchmark::State& state) {
  const auto level = static_cast<avid::EvalLevel>(state.range(0));
  const auto grid = avid::region_map(avid::DetectorSpec::defaults(), 140, 140);
  const auto evidence = random_evidence(200, 140, 5);
  for (auto _ : state) benchmark::DoNotOptimize(avid::roc(evidence, grid, avid::SweepConfig{}, level));
}
BENCHMARK(RocSweep)->Arg(0)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void RocFromScores(benchmark::State& state) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u;
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  std::unique_ptr<bool[]> labels(new bool[scores.size()]);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = u(rng);
    labels[i] = u(rng) < 0.3;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(avid::roc_from_scores(scores, std::span<const bool>(labels.get(), scores.size())));
  }
}
BENCHMARK(RocFromScores)->Arg(1000)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
